#include <gtest/gtest.h>

#include <algorithm>

#include <cmath>
#include <random>
#include <set>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "radarseg4d/config.hpp"
#include "radarseg4d/network.hpp"

using namespace radarseg4d;

namespace {

ViewStacks<float> random_inputs(const NetworkConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    ViewStacks<float> in;
    for (ViewId v : kAllViews) {
        const auto d = cfg.input_dims(v);
        Tensor<float> t({cfg.window, d.rows, d.cols});
        for (float& x : t.values()) x = u(rng);
        in[view_index(v)] = std::move(t);
    }
    return in;
}

std::size_t allocated(const ParameterStore<float>& s) {
    std::size_t n = 0;
    for (const auto& p : s.entries()) n += p.value.size();
    return n;
}

}  // namespace

TEST(NetworkConfig, PresetsValidate) {
    EXPECT_NO_THROW(NetworkConfig::reference().validate());
    EXPECT_NO_THROW(NetworkConfig::tiny().validate());
    EXPECT_NO_THROW(NetworkConfig::compact().validate());
}

TEST(NetworkConfig, RejectsBadShapes) {
    auto c = NetworkConfig::reference();
    c.window = 4;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = NetworkConfig::reference();
    c.view_dims[view_index(ViewId::RA)] = {254, 128};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = NetworkConfig::reference();
    c.aspp_dilations = {1, 32};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = NetworkConfig::reference();
    c.latent = {16, 16};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = NetworkConfig::tiny();
    c.aspp_dilations = {2};
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Network, ParamCountMatchesStorage) {
    for (const auto& cfg : {NetworkConfig::tiny(), NetworkConfig::compact(), NetworkConfig::reference()}) {
        Tmva4d<float> m(cfg, 1);
        EXPECT_EQ(allocated(m.params()), count_params(cfg));
        EXPECT_EQ(m.params().scalar_count(), count_params(cfg));
    }
}

TEST(Network, ReferenceSize) {
    const double n = double(count_params(NetworkConfig::reference()));
    EXPECT_GT(n, 7.7e6 * 0.85);
    EXPECT_LT(n, 7.7e6 * 1.15);
}

TEST(Network, ParameterNamesUnique) {
    Tmva4d<float> m(NetworkConfig::tiny(), 1);
    std::set<std::string> names;
    for (const auto& p : m.params().entries()) EXPECT_TRUE(names.insert(p.name).second) << p.name;
}

TEST(Network, CompactShapes) {
    const auto cfg = NetworkConfig::compact();
    Tmva4d<float> m(cfg, 3);
    const auto probs = m.forward(random_inputs(cfg, 1));
    EXPECT_EQ(probs.shape(), (Shape{2, 128, 128}));
    for (ViewId v : kAllViews) {
        const auto e = cfg.encoder_output_dims(v);
        EXPECT_EQ(m.encoder_outputs()[view_index(v)].shape(), (Shape{8, 1, e.rows, e.cols})) << view_name(v);
        EXPECT_EQ(m.aspp_outputs()[view_index(v)].shape(), (Shape{8, 1, e.rows, e.cols}));
    }
    EXPECT_EQ(m.latent().shape(), (Shape{40, 1, 32, 32}));
    for (std::size_t i = 0; i < 128 * 128; ++i) ASSERT_NEAR(probs[i] + probs[128 * 128 + i], 1.0f, 1e-5f);
}

TEST(Network, RejectsWrongInputs) {
    const auto cfg = NetworkConfig::tiny();
    Tmva4d<float> m(cfg, 3);
    auto in = random_inputs(cfg, 1);
    in[view_index(ViewId::ER)] = Tensor<float>({3, 8, 6});
    EXPECT_THROW(m.forward(in), ShapeError);
    in = random_inputs(cfg, 1);
    in[0] = Tensor<float>({4, 8, 8});
    EXPECT_THROW(m.forward(in), ShapeError);
}

TEST(Network, BackwardWithoutForwardThrows) {
    Tmva4d<float> m(NetworkConfig::tiny(), 1);
    EXPECT_THROW(m.backward(Tensor<float>({2, 8, 8})), std::logic_error);
    EXPECT_THROW(m.backward_logits(Tensor<float>({2, 8, 8})), std::logic_error);
}

TEST(Network, DeterministicInitAndForward) {
    const auto cfg = NetworkConfig::tiny();
    Tmva4d<float> a(cfg, 9), b(cfg, 9), c(cfg, 10);
    for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params()[i].value, b.params()[i].value);
    bool differs = false;
    for (std::size_t i = 0; i < a.params().size(); ++i) differs |= !(a.params()[i].value == c.params()[i].value);
    EXPECT_TRUE(differs);
    const auto in = random_inputs(cfg, 2);
    EXPECT_EQ(a.forward(in), b.forward(in));
    EXPECT_EQ(a.forward(in), a.forward(in));
}

TEST(Network, ZeroUpstreamGradientGivesZeroGradients) {
    const auto cfg = NetworkConfig::tiny();
    Tmva4d<double> m(cfg, 4);
    const auto p = gradcheck::make_problem(cfg, 5);
    m.zero_grad();
    m.forward(p.inputs);
    m.backward(Tensor<double>({2, 8, 8}));
    for (const auto& param : m.params().entries()) {
        for (double g : param.grad.values()) ASSERT_EQ(g, 0.0) << param.name;
    }
}

TEST(Network, GradientsAccumulateLinearly) {
    const auto cfg = NetworkConfig::tiny();
    Tmva4d<double> m(cfg, 4);
    gradcheck::randomize_biases(m, 1);
    const auto p = gradcheck::make_problem(cfg, 5);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    Tensor<double> d({2, 8, 8});
    for (double& v : d.values()) v = u(rng);
    m.zero_grad();
    m.forward_logits(p.inputs);
    m.backward_logits(d);
    std::vector<Tensor<double>> once;
    for (const auto& param : m.params().entries()) once.push_back(param.grad);
    m.forward_logits(p.inputs);
    m.backward_logits(d);
    for (std::size_t i = 0; i < once.size(); ++i) {
        const auto& g = m.params()[i].grad;
        for (std::size_t j = 0; j < g.size(); ++j) ASSERT_NEAR(g[j], 2 * once[i][j], 1e-12);
    }
}

TEST(Network, TinyGradientCheck) {
    const auto cfg = NetworkConfig::tiny();
    Tmva4d<double> m(cfg, 12);
    gradcheck::randomize_biases(m, 13);
    const auto p = gradcheck::make_problem(cfg, 14);
    const auto r = gradcheck::check(m, p);
    EXPECT_EQ(r.checked, count_params(cfg));
    for (auto& e : m.params().entries()) {
        const auto g = e.grad.values();
        EXPECT_TRUE(std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; })) << e.name;
    }
    EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST(Network, AsppDilationGradientCheck) {
    // A wider latent grid lets several dilation rates reach real taps.
    NetworkConfig cfg = NetworkConfig::tiny();
    cfg.view_dims.fill({16, 16});
    cfg.view_dims[0] = {16, 16};
    cfg.latent = {4, 4};
    cfg.aspp_dilations = {1, 2, 3};
    cfg.validate();
    Tmva4d<double> m(cfg, 24);
    gradcheck::randomize_biases(m, 25);
    const auto p = gradcheck::make_problem(cfg, 26);
    const auto r = gradcheck::check(m, p, 1e-5, 1e-6, 3);
    EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST(Checkpoint, RoundTrip) {
    oracle::TempDir dir("ckpt");
    const auto cfg = NetworkConfig::tiny();
    Tmva4d<float> a(cfg, 1), b(cfg, 2);
    save_checkpoint(dir / "m.ckpt", a);
    EXPECT_EQ(read_checkpoint_config(dir / "m.ckpt"), cfg);
    load_checkpoint(dir / "m.ckpt", b);
    for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params()[i].value, b.params()[i].value);
    const auto in = random_inputs(cfg, 4);
    EXPECT_EQ(a.forward(in), b.forward(in));
    EXPECT_EQ(oracle::slurp(dir / "m.ckpt").substr(0, 8), "TMVA4DCK");
    EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
}

TEST(Checkpoint, MismatchAndCorruption) {
    oracle::TempDir dir("ckpt");
    Tmva4d<float> a(NetworkConfig::tiny(), 1);
    save_checkpoint(dir / "m.ckpt", a);
    auto other_cfg = NetworkConfig::tiny();
    other_cfg.aspp_out_channels = 3;
    Tmva4d<float> other(other_cfg, 1);
    try {
        load_checkpoint(dir / "m.ckpt", other);
        FAIL();
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("does not match"), std::string::npos);
    }
    std::string bytes = oracle::slurp(dir / "m.ckpt");
    {
        std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
        std::ofstream(dir / "long.ckpt", std::ios::binary) << bytes << "x";
        std::string bad = bytes;
        bad[0] = 'X';
        std::ofstream(dir / "magic.ckpt", std::ios::binary) << bad;
    }
    for (const char* f : {"short.ckpt", "long.ckpt", "magic.ckpt", "absent.ckpt"}) {
        EXPECT_THROW(load_checkpoint(dir / f, a), CheckpointError) << f;
    }
}

TEST(Checkpoint, DigestTracksConfig) {
    auto a = NetworkConfig::tiny(), b = NetworkConfig::tiny();
    EXPECT_EQ(config_digest(a), config_digest(b));
    b.aspp_dilations = {1, 1};
    EXPECT_NE(config_digest(a), config_digest(b));
    EXPECT_EQ(config_canonical_json(a), nlohmann::json(a).dump());
}
