#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "polysketch/rng.hpp"
#include "polysketch/tinynn/tensor.hpp"

namespace polysketch::tinynn {

/// Architecture hyperparameters. Block b is conv3x3(stride 1, zero pad 1)
/// -> ReLU -> maxpool 2x2 stride 2 with base_filters * 2^b output channels;
/// a fully connected layer maps the flattened last block to the classes.
struct CnnConfig {
  std::size_t in_channels = 3;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t base_filters = 16;
  std::size_t num_classes = 2;
  std::size_t blocks = 4;

  std::size_t block_in_channels(std::size_t b) const { return b == 0 ? in_channels : base_filters << (b - 1); }
  std::size_t block_out_channels(std::size_t b) const { return base_filters << b; }
  // Spatial size entering block b: floor(size / 2^b).
  std::size_t height_at(std::size_t b) const { return height >> b; }
  std::size_t width_at(std::size_t b) const { return width >> b; }
  std::size_t flatten_dim() const { return block_out_channels(blocks - 1) * height_at(blocks) * width_at(blocks); }

  // Throws unless every pool sees at least a 2x2 map.
  void validate() const;

  bool operator==(const CnnConfig&) const = default;
};

/// Parameter tensors in storage order: for each block its conv weight
/// (out x in x 3 x 3) then conv bias (out); then the dense weight
/// (flatten_dim x num_classes) and dense bias (num_classes).
template <typename T>
struct Parameters {
  std::vector<std::vector<T>> tensors;

  std::size_t count() const;
  bool operator==(const Parameters&) const = default;
};

template <typename T>
class CnnModel {
public:
  // Holds no parameters until assigned.
  CnnModel() = default;
  // All parameters zero.
  explicit CnnModel(CnnConfig config);

  const CnnConfig& config() const { return config_; }

  std::span<T> conv_weight(std::size_t b) { return params_.tensors[2 * b]; }
  std::span<const T> conv_weight(std::size_t b) const { return params_.tensors[2 * b]; }
  std::span<T> conv_bias(std::size_t b) { return params_.tensors[2 * b + 1]; }
  std::span<const T> conv_bias(std::size_t b) const { return params_.tensors[2 * b + 1]; }
  std::span<T> dense_weight() { return params_.tensors[2 * config_.blocks]; }
  std::span<const T> dense_weight() const { return params_.tensors[2 * config_.blocks]; }
  std::span<T> dense_bias() { return params_.tensors[2 * config_.blocks + 1]; }
  std::span<const T> dense_bias() const { return params_.tensors[2 * config_.blocks + 1]; }

  Parameters<T>& parameters() { return params_; }
  const Parameters<T>& parameters() const { return params_; }

  // Zero tensors shaped like this model's parameters.
  Parameters<T> zero_like() const;

  template <typename U>
  CnnModel<U> cast() const {
    CnnModel<U> out(config_);
    for (std::size_t t = 0; t < params_.tensors.size(); ++t)
      for (std::size_t i = 0; i < params_.tensors[t].size(); ++i)
        out.parameters().tensors[t][i] = static_cast<U>(params_.tensors[t][i]);
    return out;
  }

  bool operator==(const CnnModel&) const = default;

private:
  CnnConfig config_;
  Parameters<T> params_;
};

// Names for the parameter tensors in storage order ("conv0.weight", ..., "dense.bias").
std::vector<std::string> parameter_names(const CnnConfig& config);

// i.i.d. N(0, 2 / fan_in) draws.
std::vector<double> kaiming_init(std::size_t fan_in, std::size_t count, std::uint64_t seed);
template <typename T>
void kaiming_fill(std::span<T> values, std::size_t fan_in, Rng& rng);

// Kaiming weights (conv fan_in = in_channels * 9, dense fan_in = flatten_dim), zero biases.
template <typename T>
CnnModel<T> kaiming_model(const CnnConfig& config, std::uint64_t seed);

// Layer primitives -----------------------------------------------------------

// weight: out x in x 3 x 3, stride 1, zero padding 1.
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, std::span<const T> weight, std::span<const T> bias);

template <typename T>
struct ConvGradients {
  Tensor4<T> dx;
  std::vector<T> dweight;
  std::vector<T> dbias;
};

template <typename T>
ConvGradients<T> conv2d_backward(const Tensor4<T>& x, std::span<const T> weight, const Tensor4<T>& dout);

template <typename T>
struct PoolResult {
  Tensor4<T> output;
  std::vector<std::size_t> argmax;  // flat input offset for each output element
};

// 2x2 window, stride 2, trailing odd row/column dropped; ties go to the first
// element in row-major window order.
template <typename T>
PoolResult<T> maxpool2_forward(const Tensor4<T>& x);

template <typename T>
Tensor4<T> maxpool2_backward(const PoolResult<T>& pooled, const std::array<std::size_t, 4>& input_dims,
                             const Tensor4<T>& dout);

template <typename T>
struct LossResult {
  T loss = T(0);
  std::vector<T> dlogits;  // batch x classes
};

/// Mean over the batch of -log softmax(logits)[label], with the row maximum
/// subtracted before exponentiation; dlogits = (softmax - onehot) / batch.
template <typename T>
LossResult<T> cross_entropy(std::span<const T> logits, std::size_t num_classes, std::span<const std::uint32_t> labels);

// Network ---------------------------------------------------------------------

// Logits, batch x num_classes.
template <typename T>
std::vector<T> forward(const CnnModel<T>& model, const Tensor4<T>& x);

template <typename T>
struct BackwardResult {
  T loss = T(0);
  Parameters<T> gradients;
};

// Cross-entropy loss of the batch and its gradient for every parameter.
template <typename T>
BackwardResult<T> backward(const CnnModel<T>& model, const Tensor4<T>& x, std::span<const std::uint32_t> labels);

template <typename T>
T batch_loss(const CnnModel<T>& model, const Tensor4<T>& x, std::span<const std::uint32_t> labels);

// Index of the largest logit per sample (lowest index on ties).
template <typename T>
std::vector<std::uint32_t> predict(const CnnModel<T>& model, const Tensor4<T>& x);

}  // namespace polysketch::tinynn
