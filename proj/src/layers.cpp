#include "radarseg4d/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>

namespace radarseg4d {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

void require_rank4(const Shape& s, const std::string& where) {
    if (s.size() != 4) throw ShapeError(where + ": expected a C x D x H x W tensor, got " + shape_string(s));
}

struct Tap {
    std::size_t i0, i1;
    double frac;
};

std::vector<Tap> linear_taps(std::size_t n_src, std::size_t n_dst) {
    std::vector<Tap> taps(n_dst);
    for (std::size_t i = 0; i < n_dst; ++i) {
        const double pos = n_dst == 1 ? 0.0
                                      : static_cast<double>(i) * static_cast<double>(n_src - 1) /
                                            static_cast<double>(n_dst - 1);
        const std::size_t i0 = std::min(static_cast<std::size_t>(std::floor(pos)), n_src - 1);
        const std::size_t i1 = std::min(i0 + 1, n_src - 1);
        taps[i] = {i0, i1, i0 == i1 ? 0.0 : pos - static_cast<double>(i0)};
    }
    return taps;
}

}  // namespace

// ---------------------------------------------------------------------------

template <typename T>
std::size_t ParameterStore<T>::add(std::string name, Shape shape, std::size_t fan_in, bool is_bias) {
    Parameter<T> p;
    p.name = std::move(name);
    p.value = Tensor<T>(shape);
    p.grad = Tensor<T>(shape);
    p.fan_in = fan_in;
    p.is_bias = is_bias;
    params_.push_back(std::move(p));
    return params_.size() - 1;
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
    for (auto& p : params_) p.grad.fill(T{0});
}

template <typename T>
void ParameterStore<T>::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& p : params_) {
        if (p.is_bias) {
            p.value.fill(T{0});
            continue;
        }
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(p.fan_in)));
        for (auto& v : p.value.values()) v = static_cast<T>(dist(rng));
    }
}

// ---------------------------------------------------------------------------

template <typename T>
Conv<T>::Conv(ParameterStore<T>& store, const std::string& name, ConvGeometry g) : store_(&store), g_(g), name_(name) {
    if (g.in_channels == 0 || g.out_channels == 0 || g.kd == 0 || g.kh == 0 || g.kw == 0 || g.dilation == 0) {
        throw std::invalid_argument(name + ": invalid convolution geometry");
    }
    const std::size_t fan_in = g.in_channels * g.kd * g.kh * g.kw;
    weight_ = store.add(name + ".weight", {g.out_channels, g.in_channels, g.kd, g.kh, g.kw}, fan_in, false);
    bias_ = store.add(name + ".bias", {g.out_channels}, fan_in, true);
}

template <typename T>
Shape Conv<T>::output_shape(const Shape& in) const {
    require_rank4(in, name_);
    if (in[0] != g_.in_channels) {
        throw ShapeError(name_ + ": expected " + std::to_string(g_.in_channels) + " input channels, got " +
                         shape_string(in));
    }
    const auto span_h = g_.dilation * (g_.kh - 1), span_w = g_.dilation * (g_.kw - 1);
    if (in[1] + 2 * g_.pd < g_.kd || in[2] + 2 * g_.ph < span_h + 1 || in[3] + 2 * g_.pw < span_w + 1) {
        throw ShapeError(name_ + ": input " + shape_string(in) + " smaller than the kernel");
    }
    return {g_.out_channels, in[1] + 2 * g_.pd - g_.kd + 1, in[2] + 2 * g_.ph - span_h, in[3] + 2 * g_.pw - span_w};
}

template <typename T>
Tensor<T> Conv<T>::forward(const Tensor<T>& x) {
    const Shape out_shape = output_shape(x.shape());
    in_shape_ = x.shape();
    const std::size_t C = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Do = out_shape[1], Ho = out_shape[2], Wo = out_shape[3];
    const std::size_t P = Do * Ho * Wo;
    const std::size_t K = C * g_.kd * g_.kh * g_.kw;
    const auto dil = static_cast<std::ptrdiff_t>(g_.dilation);

    cols_.assign(K * P, T{0});
    std::size_t row = 0;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t a = 0; a < g_.kd; ++a) {
            for (std::size_t b = 0; b < g_.kh; ++b) {
                for (std::size_t e = 0; e < g_.kw; ++e, ++row) {
                    T* dst = cols_.data() + row * P;
                    for (std::size_t d = 0; d < Do; ++d) {
                        const auto id = static_cast<std::ptrdiff_t>(d + a) - static_cast<std::ptrdiff_t>(g_.pd);
                        if (id < 0 || id >= static_cast<std::ptrdiff_t>(D)) continue;
                        for (std::size_t h = 0; h < Ho; ++h) {
                            const auto ih = static_cast<std::ptrdiff_t>(h) + static_cast<std::ptrdiff_t>(b) * dil -
                                            static_cast<std::ptrdiff_t>(g_.ph);
                            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                            const T* src = x.data() + ((c * D + static_cast<std::size_t>(id)) * H +
                                                       static_cast<std::size_t>(ih)) * W;
                            T* out = dst + (d * Ho + h) * Wo;
                            const auto off = static_cast<std::ptrdiff_t>(e) * dil - static_cast<std::ptrdiff_t>(g_.pw);
                            const std::ptrdiff_t w0 = std::max<std::ptrdiff_t>(0, -off);
                            const std::ptrdiff_t w1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(Wo),
                                                                               static_cast<std::ptrdiff_t>(W) - off);
                            for (std::ptrdiff_t w = w0; w < w1; ++w) out[w] = src[w + off];
                        }
                    }
                }
            }
        }
    }

    const auto& weight = (*store_)[weight_].value;
    const auto& bias = (*store_)[bias_].value;
    Tensor<T> y(out_shape);
    MapMat<T> Y(y.data(), static_cast<Eigen::Index>(g_.out_channels), static_cast<Eigen::Index>(P));
    ConstMapMat<T> Wm(weight.data(), static_cast<Eigen::Index>(g_.out_channels), static_cast<Eigen::Index>(K));
    ConstMapMat<T> X(cols_.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
    Y.noalias() = Wm * X;
    for (std::size_t o = 0; o < g_.out_channels; ++o) Y.row(static_cast<Eigen::Index>(o)).array() += bias[o];
    return y;
}

template <typename T>
Tensor<T> Conv<T>::backward(const Tensor<T>& dy) {
    if (in_shape_.empty()) throw std::logic_error(name_ + ": backward called before forward");
    const Shape out_shape = output_shape(in_shape_);
    require_shape(dy.shape(), out_shape, name_ + " backward");
    const std::size_t C = in_shape_[0], D = in_shape_[1], H = in_shape_[2], W = in_shape_[3];
    const std::size_t Do = out_shape[1], Ho = out_shape[2], Wo = out_shape[3];
    const std::size_t P = Do * Ho * Wo;
    const std::size_t K = C * g_.kd * g_.kh * g_.kw;
    const auto dil = static_cast<std::ptrdiff_t>(g_.dilation);

    auto& wp = (*store_)[weight_];
    auto& bp = (*store_)[bias_];
    ConstMapMat<T> dY(dy.data(), static_cast<Eigen::Index>(g_.out_channels), static_cast<Eigen::Index>(P));
    ConstMapMat<T> X(cols_.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
    MapMat<T> dW(wp.grad.data(), static_cast<Eigen::Index>(g_.out_channels), static_cast<Eigen::Index>(K));
    dW.noalias() += dY * X.transpose();
    for (std::size_t o = 0; o < g_.out_channels; ++o) bp.grad[o] += dY.row(static_cast<Eigen::Index>(o)).sum();

    ConstMapMat<T> Wm(wp.value.data(), static_cast<Eigen::Index>(g_.out_channels), static_cast<Eigen::Index>(K));
    RowMat<T> dcols = Wm.transpose() * dY;

    Tensor<T> dx(in_shape_);
    std::size_t row = 0;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t a = 0; a < g_.kd; ++a) {
            for (std::size_t b = 0; b < g_.kh; ++b) {
                for (std::size_t e = 0; e < g_.kw; ++e, ++row) {
                    const T* src = dcols.data() + row * P;
                    for (std::size_t d = 0; d < Do; ++d) {
                        const auto id = static_cast<std::ptrdiff_t>(d + a) - static_cast<std::ptrdiff_t>(g_.pd);
                        if (id < 0 || id >= static_cast<std::ptrdiff_t>(D)) continue;
                        for (std::size_t h = 0; h < Ho; ++h) {
                            const auto ih = static_cast<std::ptrdiff_t>(h) + static_cast<std::ptrdiff_t>(b) * dil -
                                            static_cast<std::ptrdiff_t>(g_.ph);
                            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                            T* dst = dx.data() + ((c * D + static_cast<std::size_t>(id)) * H +
                                                  static_cast<std::size_t>(ih)) * W;
                            const T* in = src + (d * Ho + h) * Wo;
                            const auto off = static_cast<std::ptrdiff_t>(e) * dil - static_cast<std::ptrdiff_t>(g_.pw);
                            const std::ptrdiff_t w0 = std::max<std::ptrdiff_t>(0, -off);
                            const std::ptrdiff_t w1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(Wo),
                                                                               static_cast<std::ptrdiff_t>(W) - off);
                            for (std::ptrdiff_t w = w0; w < w1; ++w) dst[w + off] += in[w];
                        }
                    }
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------

template <typename T>
ConvTranspose2x2<T>::ConvTranspose2x2(ParameterStore<T>& store, const std::string& name, std::size_t in_channels,
                                      std::size_t out_channels)
    : store_(&store), in_(in_channels), out_(out_channels), name_(name) {
    weight_ = store.add(name + ".weight", {in_channels, out_channels, 2, 2}, in_channels, false);
    bias_ = store.add(name + ".bias", {out_channels}, in_channels, true);
}

template <typename T>
Tensor<T> ConvTranspose2x2<T>::forward(const Tensor<T>& x) {
    require_rank4(x.shape(), name_);
    if (x.dim(0) != in_ || x.dim(1) != 1) {
        throw ShapeError(name_ + ": expected " + std::to_string(in_) + " x 1 x H x W input, got " +
                         shape_string(x.shape()));
    }
    input_ = x;
    const std::size_t H = x.dim(2), W = x.dim(3), P = H * W;
    const auto& weight = (*store_)[weight_].value;
    const auto& bias = (*store_)[bias_].value;
    ConstMapMat<T> Wm(weight.data(), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(out_ * 4));
    ConstMapMat<T> X(x.data(), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(P));
    const RowMat<T> Z = Wm.transpose() * X;  // (out*4) x P

    Tensor<T> y({out_, 1, 2 * H, 2 * W});
    for (std::size_t o = 0; o < out_; ++o) {
        for (std::size_t a = 0; a < 2; ++a) {
            for (std::size_t b = 0; b < 2; ++b) {
                const T* z = Z.data() + (o * 4 + a * 2 + b) * P;
                for (std::size_t i = 0; i < H; ++i) {
                    T* dst = y.data() + (o * 2 * H + 2 * i + a) * 2 * W + b;
                    for (std::size_t j = 0; j < W; ++j) dst[2 * j] = z[i * W + j] + bias[o];
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> ConvTranspose2x2<T>::backward(const Tensor<T>& dy) {
    if (input_.empty()) throw std::logic_error(name_ + ": backward called before forward");
    const std::size_t H = input_.dim(2), W = input_.dim(3), P = H * W;
    require_shape(dy.shape(), {out_, 1, 2 * H, 2 * W}, name_ + " backward");
    auto& wp = (*store_)[weight_];
    auto& bp = (*store_)[bias_];

    RowMat<T> dZ(static_cast<Eigen::Index>(out_ * 4), static_cast<Eigen::Index>(P));
    for (std::size_t o = 0; o < out_; ++o) {
        for (std::size_t a = 0; a < 2; ++a) {
            for (std::size_t b = 0; b < 2; ++b) {
                T* z = dZ.data() + (o * 4 + a * 2 + b) * P;
                for (std::size_t i = 0; i < H; ++i) {
                    const T* src = dy.data() + (o * 2 * H + 2 * i + a) * 2 * W + b;
                    for (std::size_t j = 0; j < W; ++j) z[i * W + j] = src[2 * j];
                }
            }
        }
        bp.grad[o] += dZ.middleRows(static_cast<Eigen::Index>(o * 4), 4).sum();
    }
    ConstMapMat<T> X(input_.data(), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(P));
    MapMat<T> dW(wp.grad.data(), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(out_ * 4));
    dW.noalias() += X * dZ.transpose();
    ConstMapMat<T> Wm(wp.value.data(), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(out_ * 4));
    Tensor<T> dx(input_.shape());
    MapMat<T> dX(dx.data(), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(P));
    dX.noalias() = Wm * dZ;
    return dx;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> Relu<T>::forward(Tensor<T> x) {
    active_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        active_[i] = x[i] > T{0};
        if (!active_[i]) x[i] = T{0};
    }
    return x;
}

template <typename T>
Tensor<T> Relu<T>::backward(Tensor<T> dy) const {
    if (dy.size() != active_.size()) throw ShapeError("relu backward: size mismatch");
    for (std::size_t i = 0; i < dy.size(); ++i) {
        if (!active_[i]) dy[i] = T{0};
    }
    return dy;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> MaxPool2x2<T>::forward(const Tensor<T>& x) {
    require_rank4(x.shape(), "maxpool");
    const std::size_t C = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % 2 || W % 2) throw ShapeError("maxpool: spatial dims must be even, got " + shape_string(x.shape()));
    in_shape_ = x.shape();
    Tensor<T> y({C, D, H / 2, W / 2});
    argmax_.resize(y.size());
    std::size_t o = 0;
    for (std::size_t p = 0; p < C * D; ++p) {
        const T* plane = x.data() + p * H * W;
        for (std::size_t i = 0; i < H / 2; ++i) {
            for (std::size_t j = 0; j < W / 2; ++j, ++o) {
                std::size_t best = (2 * i) * W + 2 * j;
                for (std::size_t k : {(2 * i) * W + 2 * j + 1, (2 * i + 1) * W + 2 * j, (2 * i + 1) * W + 2 * j + 1}) {
                    if (plane[k] > plane[best]) best = k;
                }
                y[o] = plane[best];
                argmax_[o] = p * H * W + best;
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> MaxPool2x2<T>::backward(const Tensor<T>& dy) const {
    if (dy.size() != argmax_.size()) throw ShapeError("maxpool backward: size mismatch");
    Tensor<T> dx(in_shape_);
    for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax_[o]] += dy[o];
    return dx;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> BilinearResize<T>::forward(const Tensor<T>& x) {
    require_rank4(x.shape(), "resize");
    in_shape_ = x.shape();
    const std::size_t planes = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
    if ((H < 2 && out_rows_ != H) || (W < 2 && out_cols_ != W)) {
        throw ShapeError("resize: cannot resize an axis of length 1");
    }
    const auto rt = linear_taps(H, out_rows_);
    const auto ct = linear_taps(W, out_cols_);
    Tensor<T> y({x.dim(0), x.dim(1), out_rows_, out_cols_});
    std::vector<double> tmp(out_rows_ * W);
    for (std::size_t p = 0; p < planes; ++p) {
        const T* src = x.data() + p * H * W;
        for (std::size_t r = 0; r < out_rows_; ++r) {
            for (std::size_t c = 0; c < W; ++c) {
                const double a = src[rt[r].i0 * W + c], b = src[rt[r].i1 * W + c];
                tmp[r * W + c] = out_rows_ == H ? a : a + rt[r].frac * (b - a);
            }
        }
        T* dst = y.data() + p * out_rows_ * out_cols_;
        for (std::size_t r = 0; r < out_rows_; ++r) {
            for (std::size_t c = 0; c < out_cols_; ++c) {
                const double a = tmp[r * W + ct[c].i0], b = tmp[r * W + ct[c].i1];
                dst[r * out_cols_ + c] = static_cast<T>(out_cols_ == W ? tmp[r * W + c] : a + ct[c].frac * (b - a));
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> BilinearResize<T>::backward(const Tensor<T>& dy) const {
    if (in_shape_.empty()) throw std::logic_error("resize: backward called before forward");
    const std::size_t planes = in_shape_[0] * in_shape_[1], H = in_shape_[2], W = in_shape_[3];
    require_shape(dy.shape(), {in_shape_[0], in_shape_[1], out_rows_, out_cols_}, "resize backward");
    const auto rt = linear_taps(H, out_rows_);
    const auto ct = linear_taps(W, out_cols_);
    Tensor<T> dx(in_shape_);
    std::vector<double> tmp(out_rows_ * W);
    for (std::size_t p = 0; p < planes; ++p) {
        std::fill(tmp.begin(), tmp.end(), 0.0);
        const T* g = dy.data() + p * out_rows_ * out_cols_;
        for (std::size_t r = 0; r < out_rows_; ++r) {
            for (std::size_t c = 0; c < out_cols_; ++c) {
                const double v = g[r * out_cols_ + c];
                if (out_cols_ == W) {
                    tmp[r * W + c] += v;
                } else {
                    tmp[r * W + ct[c].i0] += (1.0 - ct[c].frac) * v;
                    tmp[r * W + ct[c].i1] += ct[c].frac * v;
                }
            }
        }
        T* dst = dx.data() + p * H * W;
        for (std::size_t r = 0; r < out_rows_; ++r) {
            for (std::size_t c = 0; c < W; ++c) {
                const double v = tmp[r * W + c];
                if (out_rows_ == H) {
                    dst[r * W + c] += static_cast<T>(v);
                } else {
                    dst[rt[r].i0 * W + c] += static_cast<T>((1.0 - rt[r].frac) * v);
                    dst[rt[r].i1 * W + c] += static_cast<T>(rt[r].frac * v);
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> softmax_classes(const Tensor<T>& logits) {
    if (logits.rank() != 3) throw ShapeError("softmax expects K x H x W logits");
    const std::size_t K = logits.dim(0), P = logits.dim(1) * logits.dim(2);
    Tensor<T> out(logits.shape());
    for (std::size_t i = 0; i < P; ++i) {
        T m = -std::numeric_limits<T>::infinity();
        for (std::size_t k = 0; k < K; ++k) m = std::max(m, logits[k * P + i]);
        T sum{0};
        for (std::size_t k = 0; k < K; ++k) {
            out[k * P + i] = std::exp(logits[k * P + i] - m);
            sum += out[k * P + i];
        }
        for (std::size_t k = 0; k < K; ++k) out[k * P + i] /= sum;
    }
    return out;
}

template <typename T>
Tensor<T> softmax_classes_backward(const Tensor<T>& probs, const Tensor<T>& dprobs) {
    require_shape(dprobs.shape(), probs.shape(), "softmax backward");
    const std::size_t K = probs.dim(0), P = probs.dim(1) * probs.dim(2);
    Tensor<T> dz(probs.shape());
    for (std::size_t i = 0; i < P; ++i) {
        T dot{0};
        for (std::size_t k = 0; k < K; ++k) dot += probs[k * P + i] * dprobs[k * P + i];
        for (std::size_t k = 0; k < K; ++k) dz[k * P + i] = probs[k * P + i] * (dprobs[k * P + i] - dot);
    }
    return dz;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    Shape shape = parts.front()->shape();
    require_rank4(shape, "concat");
    std::size_t channels = 0;
    for (const Tensor<T>* p : parts) {
        if (p->rank() != 4 || p->dim(1) != shape[1] || p->dim(2) != shape[2] || p->dim(3) != shape[3]) {
            throw ShapeError("concat: mismatched input " + shape_string(p->shape()) + " vs " + shape_string(shape));
        }
        channels += p->dim(0);
    }
    shape[0] = channels;
    Tensor<T> out(shape);
    T* dst = out.data();
    for (const Tensor<T>* p : parts) dst = std::copy(p->values().begin(), p->values().end(), dst);
    return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& dy, const std::vector<std::size_t>& channels) {
    require_rank4(dy.shape(), "split");
    const std::size_t plane = dy.dim(1) * dy.dim(2) * dy.dim(3);
    std::vector<Tensor<T>> out;
    std::size_t offset = 0;
    for (std::size_t c : channels) {
        Tensor<T> part({c, dy.dim(1), dy.dim(2), dy.dim(3)});
        std::copy(dy.data() + offset * plane, dy.data() + (offset + c) * plane, part.data());
        offset += c;
        out.push_back(std::move(part));
    }
    if (offset != dy.dim(0)) throw ShapeError("split: channel counts do not add up");
    return out;
}

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x) {
    require_shape(x.shape(), acc.shape(), "add");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

#define RADARSEG4D_INSTANTIATE(T)                                                                        \
    template class ParameterStore<T>;                                                                    \
    template class Conv<T>;                                                                              \
    template class ConvTranspose2x2<T>;                                                                  \
    template class Relu<T>;                                                                              \
    template class MaxPool2x2<T>;                                                                        \
    template class BilinearResize<T>;                                                                    \
    template Tensor<T> softmax_classes<T>(const Tensor<T>&);                                             \
    template Tensor<T> softmax_classes_backward<T>(const Tensor<T>&, const Tensor<T>&);                  \
    template Tensor<T> concat_channels<T>(const std::vector<const Tensor<T>*>&);                         \
    template std::vector<Tensor<T>> split_channels<T>(const Tensor<T>&, const std::vector<std::size_t>&); \
    template void add_inplace<T>(Tensor<T>&, const Tensor<T>&);

RADARSEG4D_INSTANTIATE(float)
RADARSEG4D_INSTANTIATE(double)

}  // namespace radarseg4d
