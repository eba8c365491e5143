#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "radarseg4d/fov.hpp"
#include "radarseg4d/layers.hpp"
#include "radarseg4d/tensor.hpp"

namespace radarseg4d {

struct ViewDims {
    std::size_t rows = 0;
    std::size_t cols = 0;
    friend bool operator==(const ViewDims&, const ViewDims&) = default;
};

/// Architecture hyperparameters. Each encoder runs two 3D convolution stages whose
/// unpadded temporal kernels collapse the window depth to 1, each followed by 2x2
/// max pooling (the first one skipped for EA), then two 2D convolutions. A per-view
/// ASPP block feeds a latent grid that the EA decoder upsamples x4.
struct NetworkConfig {
    std::size_t window = 5;
    std::array<std::size_t, 2> temporal_kernels{3, 3};
    std::array<ViewDims, 5> view_dims{{{128, 128}, {128, 256}, {128, 256}, {256, 128}, {256, 128}}};
    std::array<std::size_t, 2> conv3d_channels{16, 32};
    std::array<std::size_t, 2> conv2d_channels{64, 64};
    std::vector<std::size_t> aspp_dilations{1, 6, 12, 18};
    std::size_t aspp_branch_channels = 512;
    std::size_t aspp_out_channels = 64;
    ViewDims latent{32, 32};
    std::array<std::size_t, 2> decoder_channels{128, 64};
    std::size_t classes = 2;

    /// The full-size model (about 7.6 million parameters).
    static NetworkConfig reference();
    /// Gradient-check scale: T = 3, 8x8 views, 2 channels everywhere.
    static NetworkConfig tiny();
    /// Narrow widths at full view resolution, used for desk-scale training.
    static NetworkConfig compact();

    ViewDims input_dims(ViewId v) const { return view_dims[view_index(v)]; }
    ViewDims encoder_output_dims(ViewId v) const;
    ViewDims output_dims() const { return input_dims(ViewId::EA); }
    std::size_t latent_channels() const { return 5 * aspp_out_channels; }

    /// Throws std::invalid_argument naming the violated constraint.
    void validate() const;
    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Closed-form parameter count from the layer shapes.
std::size_t count_params(const NetworkConfig& cfg);

/// One view's encoder: input 1 x T x H x W, output C x 1 x H/s x W/s (s = 2 for EA, 4 otherwise).
template <typename T>
class ViewEncoder {
public:
    ViewEncoder(ParameterStore<T>& store, const NetworkConfig& cfg, ViewId view);
    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& dy);

private:
    ViewId view_;
    Shape in_shape_;
    Conv<T> conv3d_a_, conv3d_b_, conv2d_a_, conv2d_b_;
    Relu<T> relu_[4];
    MaxPool2x2<T> pool_a_, pool_b_;
};

/// Parallel 1x1 and dilated 3x3 branches, concatenated and fused by a 1x1 convolution.
template <typename T>
class Aspp {
public:
    Aspp(ParameterStore<T>& store, const std::string& name, std::size_t in_channels, std::size_t branch_channels,
         std::size_t out_channels, const std::vector<std::size_t>& dilations);
    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& dy);

    std::size_t branch_count() const { return branches_.size(); }
    Conv<T>& branch(std::size_t i) { return branches_[i]; }
    Conv<T>& fuse() { return fuse_; }

private:
    std::vector<Conv<T>> branches_;
    std::vector<Relu<T>> branch_relu_;
    Conv<T> fuse_;
    Relu<T> fuse_relu_;
    std::vector<std::size_t> branch_channels_;
};

/// Resizes the five view features to the latent grid and concatenates them (EA, ER, ED, RA, DA).
template <typename T>
class LatentFusion {
public:
    explicit LatentFusion(const NetworkConfig& cfg);
    Tensor<T> forward(const std::array<Tensor<T>, 5>& features);
    std::array<Tensor<T>, 5> backward(const Tensor<T>& dy);

private:
    std::array<BilinearResize<T>, 5> resize_;
    std::vector<std::size_t> channels_;
};

/// Latent -> K logits at four times the latent resolution.
template <typename T>
class Decoder {
public:
    Decoder(ParameterStore<T>& store, const NetworkConfig& cfg);
    Tensor<T> forward(const Tensor<T>& latent);  // returns K x H x W logits
    Tensor<T> backward(const Tensor<T>& dlogits);

private:
    ConvTranspose2x2<T> up_a_, up_b_;
    Conv<T> conv_a_, conv_b_, head_;
    Relu<T> relu_[4];
    std::size_t latent_channels_;
};

/// Per-view input stacks, each T x rows x cols.
template <typename T>
using ViewStacks = std::array<Tensor<T>, 5>;

template <typename T>
class Tmva4d {
public:
    Tmva4d(const NetworkConfig& cfg, std::uint64_t seed);

    const NetworkConfig& config() const { return cfg_; }
    ParameterStore<T>& params() { return *store_; }
    const ParameterStore<T>& params() const { return *store_; }

    /// Logits K x H x W for the EA view.
    Tensor<T> forward_logits(const ViewStacks<T>& inputs);
    /// Class probabilities (softmax over K).
    Tensor<T> forward(const ViewStacks<T>& inputs);
    /// Accumulates parameter gradients from the gradient w.r.t. the probabilities
    /// returned by the last forward().
    void backward(const Tensor<T>& dprobs);
    void backward_logits(const Tensor<T>& dlogits);
    void zero_grad() { store_->zero_grad(); }

    // Intermediate results of the last forward pass.
    const std::array<Tensor<T>, 5>& encoder_outputs() const { return encoded_; }
    const std::array<Tensor<T>, 5>& aspp_outputs() const { return aspp_out_; }
    const Tensor<T>& latent() const { return latent_; }

private:
    NetworkConfig cfg_;
    std::unique_ptr<ParameterStore<T>> store_;
    std::vector<ViewEncoder<T>> encoders_;
    std::vector<Aspp<T>> aspps_;
    LatentFusion<T> fusion_;
    Decoder<T> decoder_;

    std::array<Tensor<T>, 5> encoded_, aspp_out_;
    Tensor<T> latent_, probs_;
    bool has_forward_ = false;
    bool has_probs_ = false;
};

template <typename T>
ViewStacks<T> to_view_stacks(const std::array<Tensor<float>, 5>& views);

// ---------------------------------------------------------------------------
// Checkpoints: "TMVA4DCK", u32 version, u64 config digest, u32 config JSON length + JSON,
// u32 parameter count, then per parameter: u32 name length + name, u32 rank, u32 dims,
// float32 values. All integers and floats little-endian.

std::string config_canonical_json(const NetworkConfig& cfg);
std::uint64_t config_digest(const NetworkConfig& cfg);

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string serialize_checkpoint(const Tmva4d<float>& model);
void save_checkpoint(const std::filesystem::path& path, const Tmva4d<float>& model);
/// Reads the config stored in a checkpoint.
NetworkConfig read_checkpoint_config(const std::filesystem::path& path);
/// Loads parameters into `model`; throws CheckpointError when the configs differ.
void load_checkpoint(const std::filesystem::path& path, Tmva4d<float>& model);

}  // namespace radarseg4d
