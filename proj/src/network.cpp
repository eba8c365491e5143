#include "radarseg4d/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radarseg4d {

NetworkConfig NetworkConfig::reference() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::tiny() {
    NetworkConfig c;
    c.window = 3;
    c.temporal_kernels = {3, 1};
    c.view_dims.fill({8, 8});
    c.conv3d_channels = {2, 2};
    c.conv2d_channels = {2, 2};
    c.aspp_dilations = {1};
    c.aspp_branch_channels = 2;
    c.aspp_out_channels = 2;
    c.latent = {2, 2};
    c.decoder_channels = {2, 2};
    return c;
}

NetworkConfig NetworkConfig::compact() {
    NetworkConfig c;
    c.conv3d_channels = {4, 8};
    c.conv2d_channels = {8, 8};
    c.aspp_dilations = {1, 6, 12, 18};
    c.aspp_branch_channels = 8;
    c.aspp_out_channels = 8;
    c.decoder_channels = {16, 8};
    return c;
}

ViewDims NetworkConfig::encoder_output_dims(ViewId v) const {
    const ViewDims in = input_dims(v);
    const std::size_t s = v == ViewId::EA ? 2 : 4;
    return {in.rows / s, in.cols / s};
}

void NetworkConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("network config: " + what); };
    if (window == 0) fail("window must be positive");
    std::size_t depth = window;
    for (std::size_t k : temporal_kernels) {
        if (k == 0 || k > depth) fail("temporal kernel larger than the remaining depth");
        depth -= k - 1;
    }
    if (depth != 1) fail("temporal kernels must collapse a window of " + std::to_string(window) + " to depth 1");
    for (ViewId v : kAllViews) {
        const ViewDims d = input_dims(v);
        const std::size_t s = v == ViewId::EA ? 2 : 4;
        if (d.rows == 0 || d.cols == 0 || d.rows % s || d.cols % s) {
            fail(std::string(view_name(v)) + " dims must be positive multiples of " + std::to_string(s));
        }
    }
    for (std::size_t c : conv3d_channels) if (c == 0) fail("zero channel width");
    for (std::size_t c : conv2d_channels) if (c == 0) fail("zero channel width");
    for (std::size_t c : decoder_channels) if (c == 0) fail("zero channel width");
    if (aspp_branch_channels == 0 || aspp_out_channels == 0) fail("zero ASPP width");
    if (classes < 2) fail("need at least two classes");
    if (aspp_dilations.empty()) fail("ASPP needs at least one dilation rate");
    std::size_t smallest = SIZE_MAX;
    for (ViewId v : kAllViews) {
        const ViewDims e = encoder_output_dims(v);
        smallest = std::min({smallest, e.rows, e.cols});
    }
    for (std::size_t d : aspp_dilations) {
        if (d == 0) fail("dilation rates must be positive");
        if (d >= smallest) {
            fail("dilation " + std::to_string(d) + " reaches past every tap of a " + std::to_string(smallest) +
                 "-wide feature map");
        }
    }
    if (latent.rows * 4 != output_dims().rows || latent.cols * 4 != output_dims().cols) {
        fail("latent grid must be a quarter of the EA view");
    }
}

std::size_t count_params(const NetworkConfig& cfg) {
    cfg.validate();
    auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return out * in * k + out; };
    const auto [c1, c2] = cfg.conv3d_channels;
    const auto [e1, e2] = cfg.conv2d_channels;
    const std::size_t encoder = conv(1, c1, cfg.temporal_kernels[0] * 9) + conv(c1, c2, cfg.temporal_kernels[1] * 9) +
                                conv(c2, e1, 9) + conv(e1, e2, 9);
    const std::size_t b = cfg.aspp_branch_channels, nd = cfg.aspp_dilations.size();
    const std::size_t aspp = conv(e2, b, 1) + nd * conv(e2, b, 9) + conv(b * (nd + 1), cfg.aspp_out_channels, 1);
    const auto [d1, d2] = cfg.decoder_channels;
    const std::size_t decoder = conv(cfg.latent_channels(), d1, 4) + conv(d1, d1, 9) + conv(d1, d2, 4) +
                                conv(d2, d2, 9) + conv(d2, cfg.classes, 1);
    return 5 * (encoder + aspp) + decoder;
}

// ---------------------------------------------------------------------------

namespace {

ConvGeometry conv3x3(std::size_t in, std::size_t out, std::size_t dilation = 1) {
    return {in, out, 1, 3, 3, 0, dilation, dilation, dilation};
}

ConvGeometry conv1x1(std::size_t in, std::size_t out) { return {in, out, 1, 1, 1, 0, 0, 0, 1}; }

}  // namespace

template <typename T>
ViewEncoder<T>::ViewEncoder(ParameterStore<T>& store, const NetworkConfig& cfg, ViewId view)
    : view_(view),
      conv3d_a_(store, "enc_" + std::string(view_name(view)) + ".conv3d_a",
                {1, cfg.conv3d_channels[0], cfg.temporal_kernels[0], 3, 3, 0, 1, 1, 1}),
      conv3d_b_(store, "enc_" + std::string(view_name(view)) + ".conv3d_b",
                {cfg.conv3d_channels[0], cfg.conv3d_channels[1], cfg.temporal_kernels[1], 3, 3, 0, 1, 1, 1}),
      conv2d_a_(store, "enc_" + std::string(view_name(view)) + ".conv2d_a",
                conv3x3(cfg.conv3d_channels[1], cfg.conv2d_channels[0])),
      conv2d_b_(store, "enc_" + std::string(view_name(view)) + ".conv2d_b",
                conv3x3(cfg.conv2d_channels[0], cfg.conv2d_channels[1])) {}

template <typename T>
Tensor<T> ViewEncoder<T>::forward(const Tensor<T>& x) {
    in_shape_ = x.shape();
    Tensor<T> h = relu_[0].forward(conv3d_a_.forward(x));
    if (view_ != ViewId::EA) h = pool_a_.forward(h);
    h = pool_b_.forward(relu_[1].forward(conv3d_b_.forward(h)));
    if (h.dim(1) != 1) {
        throw ShapeError("enc_" + std::string(view_name(view_)) + ": temporal depth not collapsed, got " +
                         shape_string(h.shape()));
    }
    h = relu_[2].forward(conv2d_a_.forward(h));
    return relu_[3].forward(conv2d_b_.forward(h));
}

template <typename T>
Tensor<T> ViewEncoder<T>::backward(const Tensor<T>& dy) {
    Tensor<T> g = conv2d_b_.backward(relu_[3].backward(dy));
    g = conv2d_a_.backward(relu_[2].backward(g));
    g = conv3d_b_.backward(relu_[1].backward(pool_b_.backward(g)));
    if (view_ != ViewId::EA) g = pool_a_.backward(g);
    return conv3d_a_.backward(relu_[0].backward(g));
}

template <typename T>
Aspp<T>::Aspp(ParameterStore<T>& store, const std::string& name, std::size_t in_channels,
              std::size_t branch_channels, std::size_t out_channels, const std::vector<std::size_t>& dilations) {
    branches_.emplace_back(store, name + ".branch_1x1", conv1x1(in_channels, branch_channels));
    for (std::size_t d : dilations) {
        branches_.emplace_back(store, name + ".branch_d" + std::to_string(d), conv3x3(in_channels, branch_channels, d));
    }
    branch_relu_.resize(branches_.size());
    branch_channels_.assign(branches_.size(), branch_channels);
    fuse_ = Conv<T>(store, name + ".fuse", conv1x1(branch_channels * branches_.size(), out_channels));
}

template <typename T>
Tensor<T> Aspp<T>::forward(const Tensor<T>& x) {
    std::vector<Tensor<T>> outs;
    outs.reserve(branches_.size());
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        outs.push_back(branch_relu_[i].forward(branches_[i].forward(x)));
    }
    std::vector<const Tensor<T>*> parts;
    for (const auto& o : outs) parts.push_back(&o);
    return fuse_relu_.forward(fuse_.forward(concat_channels(parts)));
}

template <typename T>
Tensor<T> Aspp<T>::backward(const Tensor<T>& dy) {
    const auto pieces = split_channels(fuse_.backward(fuse_relu_.backward(dy)), branch_channels_);
    Tensor<T> dx;
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        Tensor<T> g = branches_[i].backward(branch_relu_[i].backward(pieces[i]));
        if (i == 0) {
            dx = std::move(g);
        } else {
            add_inplace(dx, g);
        }
    }
    return dx;
}

template <typename T>
LatentFusion<T>::LatentFusion(const NetworkConfig& cfg) {
    for (auto& r : resize_) r = BilinearResize<T>(cfg.latent.rows, cfg.latent.cols);
}

template <typename T>
Tensor<T> LatentFusion<T>::forward(const std::array<Tensor<T>, 5>& features) {
    std::array<Tensor<T>, 5> resized;
    std::vector<const Tensor<T>*> parts;
    channels_.clear();
    for (std::size_t v = 0; v < 5; ++v) {
        resized[v] = resize_[v].forward(features[v]);
        channels_.push_back(resized[v].dim(0));
        parts.push_back(&resized[v]);
    }
    return concat_channels(parts);
}

template <typename T>
std::array<Tensor<T>, 5> LatentFusion<T>::backward(const Tensor<T>& dy) {
    auto pieces = split_channels(dy, channels_);
    std::array<Tensor<T>, 5> out;
    for (std::size_t v = 0; v < 5; ++v) out[v] = resize_[v].backward(pieces[v]);
    return out;
}

template <typename T>
Decoder<T>::Decoder(ParameterStore<T>& store, const NetworkConfig& cfg)
    : up_a_(store, "dec.up_a", cfg.latent_channels(), cfg.decoder_channels[0]),
      up_b_(store, "dec.up_b", cfg.decoder_channels[0], cfg.decoder_channels[1]),
      conv_a_(store, "dec.conv_a", conv3x3(cfg.decoder_channels[0], cfg.decoder_channels[0])),
      conv_b_(store, "dec.conv_b", conv3x3(cfg.decoder_channels[1], cfg.decoder_channels[1])),
      head_(store, "dec.head", conv1x1(cfg.decoder_channels[1], cfg.classes)),
      latent_channels_(cfg.latent_channels()) {}

template <typename T>
Tensor<T> Decoder<T>::forward(const Tensor<T>& latent) {
    if (latent.rank() != 4 || latent.dim(0) != latent_channels_ || latent.dim(1) != 1) {
        throw ShapeError("decoder: expected " + std::to_string(latent_channels_) + " x 1 x H x W latent, got " +
                         shape_string(latent.shape()));
    }
    Tensor<T> h = relu_[0].forward(up_a_.forward(latent));
    h = relu_[1].forward(conv_a_.forward(h));
    h = relu_[2].forward(up_b_.forward(h));
    h = relu_[3].forward(conv_b_.forward(h));
    Tensor<T> logits = head_.forward(h);
    logits.reshape({logits.dim(0), logits.dim(2), logits.dim(3)});
    return logits;
}

template <typename T>
Tensor<T> Decoder<T>::backward(const Tensor<T>& dlogits) {
    Tensor<T> g = dlogits;
    g.reshape({dlogits.dim(0), 1, dlogits.dim(1), dlogits.dim(2)});
    g = conv_b_.backward(relu_[3].backward(head_.backward(g)));
    g = up_b_.backward(relu_[2].backward(g));
    g = conv_a_.backward(relu_[1].backward(g));
    return up_a_.backward(relu_[0].backward(g));
}

// ---------------------------------------------------------------------------

template <typename T>
Tmva4d<T>::Tmva4d(const NetworkConfig& cfg, std::uint64_t seed)
    : cfg_((cfg.validate(), cfg)),
      store_(std::make_unique<ParameterStore<T>>()),
      fusion_(cfg),
      decoder_(*store_, cfg) {
    // Decoder parameters are registered first; the order is fixed by construction.
    for (ViewId v : kAllViews) encoders_.emplace_back(*store_, cfg, v);
    for (ViewId v : kAllViews) {
        aspps_.emplace_back(*store_, "aspp_" + std::string(view_name(v)), cfg.conv2d_channels[1],
                            cfg.aspp_branch_channels, cfg.aspp_out_channels, cfg.aspp_dilations);
    }
    store_->initialize(seed);
}

template <typename T>
Tensor<T> Tmva4d<T>::forward_logits(const ViewStacks<T>& inputs) {
    for (ViewId v : kAllViews) {
        const auto& x = inputs[view_index(v)];
        const ViewDims d = cfg_.input_dims(v);
        require_shape(x.shape(), {cfg_.window, d.rows, d.cols}, "input " + std::string(view_name(v)));
        Tensor<T> x4 = x;
        x4.reshape({1, cfg_.window, d.rows, d.cols});
        encoded_[view_index(v)] = encoders_[view_index(v)].forward(x4);
        aspp_out_[view_index(v)] = aspps_[view_index(v)].forward(encoded_[view_index(v)]);
    }
    latent_ = fusion_.forward(aspp_out_);
    Tensor<T> logits = decoder_.forward(latent_);
#ifndef NDEBUG
    for (T v : logits.values()) {
        if (!std::isfinite(v)) throw std::runtime_error("non-finite logit");
    }
#endif
    has_forward_ = true;
    has_probs_ = false;
    return logits;
}

template <typename T>
Tensor<T> Tmva4d<T>::forward(const ViewStacks<T>& inputs) {
    probs_ = softmax_classes(forward_logits(inputs));
    has_probs_ = true;
    return probs_;
}

template <typename T>
void Tmva4d<T>::backward_logits(const Tensor<T>& dlogits) {
    if (!has_forward_) throw std::logic_error("backward called without a preceding forward");
    const auto dlatent = decoder_.backward(dlogits);
    const auto daspp = fusion_.backward(dlatent);
    for (std::size_t v = 0; v < 5; ++v) encoders_[v].backward(aspps_[v].backward(daspp[v]));
    has_forward_ = false;
    has_probs_ = false;
}

template <typename T>
void Tmva4d<T>::backward(const Tensor<T>& dprobs) {
    if (!has_forward_ || !has_probs_) throw std::logic_error("backward called without a preceding forward");
    backward_logits(softmax_classes_backward(probs_, dprobs));
}

template <typename T>
ViewStacks<T> to_view_stacks(const std::array<Tensor<float>, 5>& views) {
    ViewStacks<T> out;
    for (std::size_t v = 0; v < 5; ++v) out[v] = views[v].template cast<T>();
    return out;
}

template class ViewEncoder<float>;
template class ViewEncoder<double>;
template class Aspp<float>;
template class Aspp<double>;
template class LatentFusion<float>;
template class LatentFusion<double>;
template class Decoder<float>;
template class Decoder<double>;
template class Tmva4d<float>;
template class Tmva4d<double>;
template ViewStacks<float> to_view_stacks<float>(const std::array<Tensor<float>, 5>&);
template ViewStacks<double> to_view_stacks<double>(const std::array<Tensor<float>, 5>&);

}  // namespace radarseg4d
