#include "polysketch/tinynn/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "polysketch/error.hpp"

namespace polysketch::tinynn {

void CnnConfig::validate() const {
  require(in_channels >= 1 && base_filters >= 1 && num_classes >= 1 && blocks >= 1,
          "cnn: channels, filters, classes and blocks must all be at least 1");
  for (std::size_t b = 0; b < blocks; ++b)
    require(height_at(b) >= 2 && width_at(b) >= 2,
            "cnn: input " + std::to_string(height) + "x" + std::to_string(width) + " is too small for " +
                std::to_string(blocks) + " pooling stages");
}

template <typename T>
std::size_t Parameters<T>::count() const {
  std::size_t total = 0;
  for (const auto& t : tensors) total += t.size();
  return total;
}

template <typename T>
CnnModel<T>::CnnModel(CnnConfig config) : config_(config) {
  config_.validate();
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    const auto out = config_.block_out_channels(b);
    params_.tensors.emplace_back(out * config_.block_in_channels(b) * 9, T(0));
    params_.tensors.emplace_back(out, T(0));
  }
  params_.tensors.emplace_back(config_.flatten_dim() * config_.num_classes, T(0));
  params_.tensors.emplace_back(config_.num_classes, T(0));
}

template <typename T>
Parameters<T> CnnModel<T>::zero_like() const {
  Parameters<T> out;
  for (const auto& t : params_.tensors) out.tensors.emplace_back(t.size(), T(0));
  return out;
}

std::vector<std::string> parameter_names(const CnnConfig& config) {
  std::vector<std::string> names;
  for (std::size_t b = 0; b < config.blocks; ++b) {
    names.push_back("conv" + std::to_string(b) + ".weight");
    names.push_back("conv" + std::to_string(b) + ".bias");
  }
  names.emplace_back("dense.weight");
  names.emplace_back("dense.bias");
  return names;
}

template <typename T>
void kaiming_fill(std::span<T> values, std::size_t fan_in, Rng& rng) {
  require(fan_in >= 1, "kaiming: fan_in must be at least 1");
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : values) v = static_cast<T>(rng.normal(0.0, stddev));
}

std::vector<double> kaiming_init(std::size_t fan_in, std::size_t count, std::uint64_t seed) {
  std::vector<double> values(count);
  Rng rng(seed);
  kaiming_fill(std::span<double>(values), fan_in, rng);
  return values;
}

template <typename T>
CnnModel<T> kaiming_model(const CnnConfig& config, std::uint64_t seed) {
  CnnModel<T> model(config);
  Rng rng(seed);
  for (std::size_t b = 0; b < config.blocks; ++b) kaiming_fill(model.conv_weight(b), config.block_in_channels(b) * 9, rng);
  kaiming_fill(model.dense_weight(), config.flatten_dim(), rng);
  return model;
}

// Layers ------------------------------------------------------------------------

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, std::span<const T> weight, std::span<const T> bias) {
  const std::size_t in_ch = x.channels();
  const std::size_t out_ch = bias.size();
  require(in_ch >= 1 && weight.size() == out_ch * in_ch * 9,
          "conv2d: weight shape does not match " + std::to_string(out_ch) + "x" + std::to_string(in_ch) + "x3x3");
  const std::size_t h = x.height(), w = x.width();
  Tensor4<T> out(x.batch(), out_ch, h, w);
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
      auto dst = out.plane(n, oc);
      std::fill(dst.begin(), dst.end(), bias[oc]);
      for (std::size_t ic = 0; ic < in_ch; ++ic) {
        const auto src = x.plane(n, ic);
        const T* kernel = weight.data() + (oc * in_ch + ic) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const T k = kernel[ky * 3 + kx];
            // output column ox reads input column ox + kx - 1
            const std::size_t x_begin = kx == 0 ? 1 : 0;
            const std::size_t x_end = kx == 2 ? w - 1 : w;
            for (std::size_t oy = 0; oy < h; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - 1;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              T* orow = dst.data() + oy * w;
              const T* irow = src.data() + static_cast<std::size_t>(iy) * w;
              for (std::size_t ox = x_begin; ox < x_end; ++ox) orow[ox] += k * irow[ox + kx - 1];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
ConvGradients<T> conv2d_backward(const Tensor4<T>& x, std::span<const T> weight, const Tensor4<T>& dout) {
  const std::size_t in_ch = x.channels();
  const std::size_t out_ch = dout.channels();
  require(weight.size() == out_ch * in_ch * 9, "conv2d_backward: weight shape mismatch");
  require(dout.batch() == x.batch() && dout.height() == x.height() && dout.width() == x.width(),
          "conv2d_backward: upstream gradient shape mismatch");
  const std::size_t h = x.height(), w = x.width();
  ConvGradients<T> g{Tensor4<T>(x.batch(), in_ch, h, w), std::vector<T>(weight.size(), T(0)),
                     std::vector<T>(out_ch, T(0))};
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
      const auto grad = dout.plane(n, oc);
      T bias_sum = T(0);
      for (T v : grad) bias_sum += v;
      g.dbias[oc] += bias_sum;
      for (std::size_t ic = 0; ic < in_ch; ++ic) {
        const auto src = x.plane(n, ic);
        auto dsrc = g.dx.plane(n, ic);
        const T* kernel = weight.data() + (oc * in_ch + ic) * 9;
        T* dkernel = g.dweight.data() + (oc * in_ch + ic) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const T k = kernel[ky * 3 + kx];
            const std::size_t x_begin = kx == 0 ? 1 : 0;
            const std::size_t x_end = kx == 2 ? w - 1 : w;
            T acc = T(0);
            for (std::size_t oy = 0; oy < h; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - 1;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              const T* grow = grad.data() + oy * w;
              const T* irow = src.data() + static_cast<std::size_t>(iy) * w;
              T* drow = dsrc.data() + static_cast<std::size_t>(iy) * w;
              for (std::size_t ox = x_begin; ox < x_end; ++ox) {
                acc += grow[ox] * irow[ox + kx - 1];
                drow[ox + kx - 1] += k * grow[ox];
              }
            }
            dkernel[ky * 3 + kx] += acc;
          }
        }
      }
    }
  }
  return g;
}

template <typename T>
PoolResult<T> maxpool2_forward(const Tensor4<T>& x) {
  require(x.height() >= 2 && x.width() >= 2, "maxpool2: spatial dims must be at least 2x2");
  const std::size_t oh = x.height() / 2, ow = x.width() / 2;
  PoolResult<T> r{Tensor4<T>(x.batch(), x.channels(), oh, ow), {}};
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
          std::size_t best = x.offset(n, c, 2 * oy, 2 * ox);
          T best_value = x.values()[best];
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t at = x.offset(n, c, 2 * oy + dy, 2 * ox + dx);
              if (x.values()[at] > best_value) {
                best_value = x.values()[at];
                best = at;
              }
            }
          r.output.values()[o] = best_value;
          r.argmax[o] = best;
        }
  return r;
}

template <typename T>
Tensor4<T> maxpool2_backward(const PoolResult<T>& pooled, const std::array<std::size_t, 4>& input_dims,
                             const Tensor4<T>& dout) {
  require(dout.dims() == pooled.output.dims(), "maxpool2_backward: upstream gradient shape mismatch");
  Tensor4<T> dx(input_dims[0], input_dims[1], input_dims[2], input_dims[3]);
  for (std::size_t o = 0; o < pooled.argmax.size(); ++o) dx.values()[pooled.argmax[o]] += dout.values()[o];
  return dx;
}

template <typename T>
LossResult<T> cross_entropy(std::span<const T> logits, std::size_t num_classes, std::span<const std::uint32_t> labels) {
  require(num_classes >= 1 && logits.size() == labels.size() * num_classes,
          "cross_entropy: logits and labels are not aligned");
  require(!labels.empty(), "cross_entropy: empty batch");
  const std::size_t batch = labels.size();
  LossResult<T> r{T(0), std::vector<T>(logits.size())};
  const T inv_batch = T(1) / static_cast<T>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    require(labels[i] < num_classes, "cross_entropy: label " + std::to_string(labels[i]) + " out of range");
    const T* row = logits.data() + i * num_classes;
    T* grad = r.dlogits.data() + i * num_classes;
    const T peak = *std::max_element(row, row + num_classes);
    T denom = T(0);
    for (std::size_t k = 0; k < num_classes; ++k) {
      grad[k] = std::exp(row[k] - peak);
      denom += grad[k];
    }
    r.loss += (std::log(denom) - (row[labels[i]] - peak)) * inv_batch;
    for (std::size_t k = 0; k < num_classes; ++k) grad[k] = grad[k] / denom * inv_batch;
    grad[labels[i]] -= inv_batch;
  }
  return r;
}

// Network -----------------------------------------------------------------------

namespace {

template <typename T>
struct BlockCache {
  Tensor4<T> input;
  Tensor4<T> activated;  // ReLU(conv(input))
  PoolResult<T> pooled;
};

template <typename T>
struct ForwardCache {
  std::vector<BlockCache<T>> blocks;
  std::vector<T> logits;
};

template <typename T>
ForwardCache<T> run_forward(const CnnModel<T>& model, const Tensor4<T>& x) {
  const auto& cfg = model.config();
  require(x.channels() == cfg.in_channels && x.height() == cfg.height && x.width() == cfg.width,
          "forward: input must be " + std::to_string(cfg.in_channels) + "x" + std::to_string(cfg.height) + "x" +
              std::to_string(cfg.width));
  ForwardCache<T> cache;
  Tensor4<T> current = x;
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    BlockCache<T> block;
    block.activated = conv2d_forward<T>(current, model.conv_weight(b), model.conv_bias(b));
    for (auto& v : block.activated.values()) v = std::max(v, T(0));
    block.pooled = maxpool2_forward(block.activated);
    block.input = std::move(current);
    current = block.pooled.output;
    cache.blocks.push_back(std::move(block));
  }
  const std::size_t batch = x.batch(), flat = cfg.flatten_dim(), classes = cfg.num_classes;
  require(current.size() == batch * flat, "forward: flatten dimension mismatch");
  const auto weight = model.dense_weight();
  const auto bias = model.dense_bias();
  cache.logits.assign(batch * classes, T(0));
  for (std::size_t n = 0; n < batch; ++n) {
    T* out = cache.logits.data() + n * classes;
    std::copy(bias.begin(), bias.end(), out);
    const T* feat = current.values().data() + n * flat;
    for (std::size_t f = 0; f < flat; ++f) {
      const T* wrow = weight.data() + f * classes;
      for (std::size_t k = 0; k < classes; ++k) out[k] += feat[f] * wrow[k];
    }
  }
  return cache;
}

}  // namespace

template <typename T>
std::vector<T> forward(const CnnModel<T>& model, const Tensor4<T>& x) {
  return run_forward(model, x).logits;
}

template <typename T>
BackwardResult<T> backward(const CnnModel<T>& model, const Tensor4<T>& x, std::span<const std::uint32_t> labels) {
  const auto& cfg = model.config();
  require(labels.size() == x.batch(), "backward: labels and batch differ in length");
  auto cache = run_forward(model, x);
  auto loss = cross_entropy<T>(cache.logits, cfg.num_classes, labels);

  BackwardResult<T> r{loss.loss, model.zero_like()};
  auto& grads = r.gradients.tensors;
  const std::size_t batch = x.batch(), flat = cfg.flatten_dim(), classes = cfg.num_classes;

  const auto& last = cache.blocks.back().pooled.output;
  const auto weight = model.dense_weight();
  auto& dweight = grads[2 * cfg.blocks];
  auto& dbias = grads[2 * cfg.blocks + 1];
  Tensor4<T> dcurrent(last.batch(), last.channels(), last.height(), last.width());
  for (std::size_t n = 0; n < batch; ++n) {
    const T* g = loss.dlogits.data() + n * classes;
    const T* feat = last.values().data() + n * flat;
    T* dfeat = dcurrent.values().data() + n * flat;
    for (std::size_t k = 0; k < classes; ++k) dbias[k] += g[k];
    for (std::size_t f = 0; f < flat; ++f) {
      const T* wrow = weight.data() + f * classes;
      T* dwrow = dweight.data() + f * classes;
      T acc = T(0);
      for (std::size_t k = 0; k < classes; ++k) {
        dwrow[k] += feat[f] * g[k];
        acc += wrow[k] * g[k];
      }
      dfeat[f] = acc;
    }
  }

  for (std::size_t b = cfg.blocks; b-- > 0;) {
    auto& block = cache.blocks[b];
    auto dact = maxpool2_backward(block.pooled, block.activated.dims(), dcurrent);
    const auto act = block.activated.values();
    auto dvals = dact.values();
    for (std::size_t i = 0; i < dvals.size(); ++i)
      if (!(act[i] > T(0))) dvals[i] = T(0);
    auto conv = conv2d_backward<T>(block.input, model.conv_weight(b), dact);
    grads[2 * b] = std::move(conv.dweight);
    grads[2 * b + 1] = std::move(conv.dbias);
    dcurrent = std::move(conv.dx);
  }
  return r;
}

template <typename T>
T batch_loss(const CnnModel<T>& model, const Tensor4<T>& x, std::span<const std::uint32_t> labels) {
  return cross_entropy<T>(forward(model, x), model.config().num_classes, labels).loss;
}

template <typename T>
std::vector<std::uint32_t> predict(const CnnModel<T>& model, const Tensor4<T>& x) {
  const auto logits = forward(model, x);
  const std::size_t classes = model.config().num_classes;
  std::vector<std::uint32_t> out(x.batch());
  for (std::size_t n = 0; n < x.batch(); ++n) {
    const T* row = logits.data() + n * classes;
    out[n] = static_cast<std::uint32_t>(std::max_element(row, row + classes) - row);
  }
  return out;
}

#define POLYSKETCH_INSTANTIATE(T)                                                                                  \
  template struct Parameters<T>;                                                                                   \
  template class CnnModel<T>;                                                                                      \
  template void kaiming_fill<T>(std::span<T>, std::size_t, Rng&);                                                  \
  template CnnModel<T> kaiming_model<T>(const CnnConfig&, std::uint64_t);                                          \
  template Tensor4<T> conv2d_forward<T>(const Tensor4<T>&, std::span<const T>, std::span<const T>);                \
  template ConvGradients<T> conv2d_backward<T>(const Tensor4<T>&, std::span<const T>, const Tensor4<T>&);          \
  template PoolResult<T> maxpool2_forward<T>(const Tensor4<T>&);                                                   \
  template Tensor4<T> maxpool2_backward<T>(const PoolResult<T>&, const std::array<std::size_t, 4>&,                \
                                           const Tensor4<T>&);                                                     \
  template LossResult<T> cross_entropy<T>(std::span<const T>, std::size_t, std::span<const std::uint32_t>);        \
  template std::vector<T> forward<T>(const CnnModel<T>&, const Tensor4<T>&);                                       \
  template BackwardResult<T> backward<T>(const CnnModel<T>&, const Tensor4<T>&, std::span<const std::uint32_t>);   \
  template T batch_loss<T>(const CnnModel<T>&, const Tensor4<T>&, std::span<const std::uint32_t>);                 \
  template std::vector<std::uint32_t> predict<T>(const CnnModel<T>&, const Tensor4<T>&);

POLYSKETCH_INSTANTIATE(float)
POLYSKETCH_INSTANTIATE(double)

#undef POLYSKETCH_INSTANTIATE

}  // namespace polysketch::tinynn
