#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "oracles.hpp"
#include "radarseg4d/layers.hpp"
#include "radarseg4d/projection.hpp"

using namespace radarseg4d;

namespace {

Tensor<double> random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<double> t(std::move(s));
    for (double& v : t.values()) v = u(rng);
    return t;
}

void randomize(ParameterStore<double>& store, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& p : store.entries()) {
        for (double& v : p.value.values()) v = u(rng);
    }
}

/// Direct 3D convolution with spatial dilation.
Tensor<double> conv_direct(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                           const ConvGeometry& g) {
    const long C = long(x.dim(0)), D = long(x.dim(1)), H = long(x.dim(2)), W = long(x.dim(3));
    const long dil = long(g.dilation);
    const long Do = D + 2 * long(g.pd) - long(g.kd) + 1;
    const long Ho = H + 2 * long(g.ph) - dil * (long(g.kh) - 1);
    const long Wo = W + 2 * long(g.pw) - dil * (long(g.kw) - 1);
    Tensor<double> y({g.out_channels, std::size_t(Do), std::size_t(Ho), std::size_t(Wo)});
    for (long o = 0; o < long(g.out_channels); ++o)
        for (long d = 0; d < Do; ++d)
            for (long h = 0; h < Ho; ++h)
                for (long ww = 0; ww < Wo; ++ww) {
                    double acc = b[o];
                    for (long c = 0; c < C; ++c)
                        for (long a = 0; a < long(g.kd); ++a)
                            for (long i = 0; i < long(g.kh); ++i)
                                for (long j = 0; j < long(g.kw); ++j) {
                                    const long id = d + a - long(g.pd), ih = h + i * dil - long(g.ph),
                                               iw = ww + j * dil - long(g.pw);
                                    if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                    acc += w[(((o * C + c) * long(g.kd) + a) * long(g.kh) + i) * long(g.kw) + j] *
                                           x[((c * D + id) * H + ih) * W + iw];
                                }
                    y[((o * Do + d) * Ho + h) * Wo + ww] = acc;
                }
    return y;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Checks parameter and input gradients of a layer against central differences of
/// L = <r, f(x)>.
void check_layer_gradients(ParameterStore<double>& store, Tensor<double> x,
                           const std::function<Tensor<double>(const Tensor<double>&)>& fwd,
                           const std::function<Tensor<double>(const Tensor<double>&)>& bwd, std::mt19937_64& rng) {
    const Tensor<double> y = fwd(x);
    const Tensor<double> r = random_tensor(y.shape(), rng);
    store.zero_grad();
    fwd(x);
    const Tensor<double> dx = bwd(r);
    const double h = 1e-6;
    auto loss = [&] { return dot(r, fwd(x)); };
    for (auto& p : store.entries()) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double keep = p.value[i];
            p.value[i] = keep + h;
            const double lp = loss();
            p.value[i] = keep - h;
            const double lm = loss();
            p.value[i] = keep;
            const double fd = (lp - lm) / (2 * h);
            ASSERT_NEAR(p.grad[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << p.name << "[" << i << "]";
        }
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double lp = loss();
        x[i] = keep - h;
        const double lm = loss();
        x[i] = keep;
        const double fd = (lp - lm) / (2 * h);
        ASSERT_NEAR(dx[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "input[" << i << "]";
    }
}

}  // namespace

TEST(ParameterStore, CountAndInit) {
    ParameterStore<float> s;
    Conv<float> c(s, "c", {1, 1, 1, 3, 3, 0, 1, 1, 1});
    EXPECT_EQ(s.scalar_count(), 10u);
    EXPECT_EQ(Conv<float>::param_count({1, 1, 1, 3, 3, 0, 1, 1, 1}), 10u);
    s.initialize(1);
    ParameterStore<float> t;
    Conv<float> d(t, "c", {1, 1, 1, 3, 3, 0, 1, 1, 1});
    t.initialize(1);
    EXPECT_EQ(s[0].value, t[0].value);
    EXPECT_EQ(s[1].value[0], 0.0f);
}

TEST(Conv, MatchesDirectConvolution) {
    std::mt19937_64 rng(1);
    const std::vector<ConvGeometry> geoms{
        {2, 3, 3, 3, 3, 0, 1, 1, 1},   // temporal, depth unpadded
        {3, 2, 1, 3, 3, 0, 2, 2, 2},   // dilated
        {3, 4, 1, 3, 3, 0, 5, 5, 5},   // dilation close to the map size
        {4, 2, 1, 1, 1, 0, 0, 0, 1},   // pointwise
    };
    for (const auto& g : geoms) {
        ParameterStore<double> store;
        Conv<double> conv(store, "c", g);
        randomize(store, rng);
        const auto x = random_tensor({g.in_channels, g.kd == 3 ? 5u : 1u, 7, 6}, rng);
        const auto got = conv.forward(x);
        const auto want = conv_direct(x, store[0].value, store[1].value, g);
        ASSERT_EQ(got.shape(), want.shape());
        for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-12);
    }
}

TEST(Conv, Gradients) {
    std::mt19937_64 rng(2);
    for (const ConvGeometry g : {ConvGeometry{2, 2, 3, 3, 3, 0, 1, 1, 1}, ConvGeometry{2, 3, 1, 3, 3, 0, 3, 3, 3}}) {
        ParameterStore<double> store;
        Conv<double> conv(store, "c", g);
        randomize(store, rng);
        check_layer_gradients(
            store, random_tensor({2, g.kd == 3 ? 4u : 1u, 6, 5}, rng),
            [&](const Tensor<double>& x) { return conv.forward(x); },
            [&](const Tensor<double>& d) { return conv.backward(d); }, rng);
    }
}

TEST(Conv, ShapeErrorsNameTheLayer) {
    ParameterStore<float> store;
    Conv<float> conv(store, "enc_ea.conv3d_a", {1, 2, 3, 3, 3, 0, 1, 1, 1});
    try {
        conv.forward(Tensor<float>({2, 5, 8, 8}));
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("enc_ea.conv3d_a"), std::string::npos);
    }
}

TEST(ConvTranspose, DirectAndGradients) {
    std::mt19937_64 rng(3);
    ParameterStore<double> store;
    ConvTranspose2x2<double> up(store, "up", 3, 2);
    randomize(store, rng);
    const auto x = random_tensor({3, 1, 3, 4}, rng);
    const auto y = up.forward(x);
    ASSERT_EQ(y.shape(), (Shape{2, 1, 6, 8}));
    const auto& w = store[0].value;
    for (std::size_t o = 0; o < 2; ++o)
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 8; ++j) {
                double acc = store[1].value[o];
                for (std::size_t c = 0; c < 3; ++c) {
                    acc += w[((c * 2 + o) * 2 + i % 2) * 2 + j % 2] * x[(c * 3 + i / 2) * 4 + j / 2];
                }
                ASSERT_NEAR(y[(o * 6 + i) * 8 + j], acc, 1e-12);
            }
    check_layer_gradients(
        store, x, [&](const Tensor<double>& t) { return up.forward(t); },
        [&](const Tensor<double>& d) { return up.backward(d); }, rng);
}

TEST(MaxPool, ForwardAndGradient) {
    std::mt19937_64 rng(4);
    MaxPool2x2<double> pool;
    ParameterStore<double> none;
    const auto x = random_tensor({2, 2, 4, 6}, rng);
    const auto y = pool.forward(x);
    ASSERT_EQ(y.shape(), (Shape{2, 2, 2, 3}));
    EXPECT_EQ(y[0], std::max({x[0], x[1], x[6], x[7]}));
    check_layer_gradients(
        none, x, [&](const Tensor<double>& t) { return pool.forward(t); },
        [&](const Tensor<double>& d) { return pool.backward(d); }, rng);
    EXPECT_THROW(pool.forward(Tensor<double>({1, 1, 3, 4})), ShapeError);
}

TEST(Relu, Gradient) {
    std::mt19937_64 rng(5);
    Relu<double> relu;
    ParameterStore<double> none;
    check_layer_gradients(
        none, random_tensor({3, 1, 4, 4}, rng), [&](const Tensor<double>& t) { return relu.forward(t); },
        [&](const Tensor<double>& d) { return relu.backward(d); }, rng);
}

TEST(BilinearResize, MatchesResizeLinearAndGradient) {
    std::mt19937_64 rng(6);
    Tensor<float> x({3, 1, 16, 8});
    std::uniform_real_distribution<float> u(0, 1);
    for (float& v : x.values()) v = u(rng);
    BilinearResize<float> rs(32, 32);
    const auto y = rs.forward(x);
    for (std::size_t c = 0; c < 3; ++c) {
        Matrix plane({16, 8}, std::vector<float>(x.data() + c * 128, x.data() + (c + 1) * 128));
        const Matrix want = resize_linear(plane, 32, 32);
        for (std::size_t i = 0; i < want.size(); ++i) ASSERT_EQ(y[c * 1024 + i], want[i]);
    }
    BilinearResize<double> rd(6, 9);
    ParameterStore<double> none;
    check_layer_gradients(
        none, random_tensor({2, 1, 4, 5}, rng), [&](const Tensor<double>& t) { return rd.forward(t); },
        [&](const Tensor<double>& d) { return rd.backward(d); }, rng);
}

TEST(Softmax, LawsAndGradient) {
    std::mt19937_64 rng(7);
    const auto logits = random_tensor({2, 3, 3}, rng, -5, 5);
    const auto p = softmax_classes(logits);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(p[i] + p[9 + i], 1.0, 1e-12);
    Tensor<double> zero({2, 2, 2});
    const auto half = softmax_classes(zero);
    for (double v : half.values()) EXPECT_EQ(v, 0.5);
    Tensor<double> shifted = logits;
    for (double& v : shifted.values()) v += 7.25;
    const auto q = softmax_classes(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);

    ParameterStore<double> none;
    Tensor<double> probs;
    check_layer_gradients(
        none, logits,
        [&](const Tensor<double>& t) {
            probs = softmax_classes(t);
            return probs;
        },
        [&](const Tensor<double>& d) { return softmax_classes_backward(probs, d); }, rng);
}

TEST(Concat, SplitIsInverse) {
    std::mt19937_64 rng(8);
    const auto a = random_tensor({2, 1, 3, 3}, rng), b = random_tensor({3, 1, 3, 3}, rng);
    const auto c = concat_channels<double>({&a, &b});
    ASSERT_EQ(c.dim(0), 5u);
    const auto parts = split_channels(c, {2, 3});
    EXPECT_EQ(parts[0], a);
    EXPECT_EQ(parts[1], b);
}
