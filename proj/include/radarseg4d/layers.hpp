#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "radarseg4d/tensor.hpp"

namespace radarseg4d {

/// A named trainable array and its gradient accumulator.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    std::size_t fan_in = 1;
    bool is_bias = false;
};

template <typename T>
class ParameterStore {
public:
    std::size_t add(std::string name, Shape shape, std::size_t fan_in, bool is_bias);

    Parameter<T>& operator[](std::size_t i) { return params_[i]; }
    const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }
    std::size_t size() const { return params_.size(); }
    std::vector<Parameter<T>>& entries() { return params_; }
    const std::vector<Parameter<T>>& entries() const { return params_; }

    std::size_t scalar_count() const;
    void zero_grad();
    /// He fan-in initialization for weights, zeros for biases, in creation order.
    void initialize(std::uint64_t seed);

private:
    std::vector<Parameter<T>> params_;
};

/// Convolution over C x D x H x W feature maps with stride 1. Depth is never dilated;
/// 2D convolutions use D = 1 and kd = 1.
struct ConvGeometry {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kd = 1, kh = 3, kw = 3;
    std::size_t pd = 0, ph = 1, pw = 1;
    std::size_t dilation = 1;  // spatial
};

template <typename T>
class Conv {
public:
    Conv() = default;
    Conv(ParameterStore<T>& store, const std::string& name, ConvGeometry g);

    Shape output_shape(const Shape& in) const;
    Tensor<T> forward(const Tensor<T>& x);
    /// Accumulates parameter gradients and returns the input gradient.
    Tensor<T> backward(const Tensor<T>& dy);

    const ConvGeometry& geometry() const { return g_; }
    std::size_t weight_index() const { return weight_; }
    std::size_t bias_index() const { return bias_; }
    static std::size_t param_count(const ConvGeometry& g) {
        return g.out_channels * g.in_channels * g.kd * g.kh * g.kw + g.out_channels;
    }

private:
    ParameterStore<T>* store_ = nullptr;
    ConvGeometry g_;
    std::size_t weight_ = 0, bias_ = 0;
    std::string name_;
    Shape in_shape_;
    std::vector<T> cols_;
};

/// 2x2 kernel, stride 2 transposed convolution on C x 1 x H x W maps.
template <typename T>
class ConvTranspose2x2 {
public:
    ConvTranspose2x2() = default;
    ConvTranspose2x2(ParameterStore<T>& store, const std::string& name, std::size_t in_channels,
                     std::size_t out_channels);

    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& dy);
    static std::size_t param_count(std::size_t in, std::size_t out) { return in * out * 4 + out; }

private:
    ParameterStore<T>* store_ = nullptr;
    std::size_t in_ = 0, out_ = 0;
    std::size_t weight_ = 0, bias_ = 0;
    std::string name_;
    Tensor<T> input_;
};

template <typename T>
class Relu {
public:
    Tensor<T> forward(Tensor<T> x);
    Tensor<T> backward(Tensor<T> dy) const;

private:
    std::vector<std::uint8_t> active_;
};

/// 2x2 spatial max pooling over C x D x H x W; H and W must be even.
template <typename T>
class MaxPool2x2 {
public:
    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& dy) const;

private:
    Shape in_shape_;
    std::vector<std::size_t> argmax_;
};

/// Corner-aligned bilinear resize of every C x D plane of a C x D x H x W map.
/// Matches resize_linear on each plane.
template <typename T>
class BilinearResize {
public:
    BilinearResize() = default;
    BilinearResize(std::size_t out_rows, std::size_t out_cols) : out_rows_(out_rows), out_cols_(out_cols) {}

    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& dy) const;

private:
    std::size_t out_rows_ = 0, out_cols_ = 0;
    Shape in_shape_;
};

/// Softmax across the class axis of a K x H x W tensor.
template <typename T>
Tensor<T> softmax_classes(const Tensor<T>& logits);
/// Gradient of the logits given probabilities and the gradient w.r.t. probabilities.
template <typename T>
Tensor<T> softmax_classes_backward(const Tensor<T>& probs, const Tensor<T>& dprobs);

/// Concatenates C_i x D x H x W tensors along channels.
template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts);
/// Splits dy back into pieces with the given channel counts.
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& dy, const std::vector<std::size_t>& channels);

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x);

}  // namespace radarseg4d
