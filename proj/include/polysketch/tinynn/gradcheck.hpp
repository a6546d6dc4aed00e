#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "polysketch/tinynn/cnn.hpp"

namespace polysketch::tinynn {

using GradientFn =
    std::function<Parameters<double>(const CnnModel<double>&, const Tensor4<double>&, std::span<const std::uint32_t>)>;

struct TensorCheck {
  std::string name;
  std::size_t count = 0;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_relative_error = 0.0;
  double step = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Default analytic gradient: backward(...).gradients.
Parameters<double> analytic_gradients(const CnnModel<double>& model, const Tensor4<double>& x,
                                      std::span<const std::uint32_t> labels);

/// Compares analytic gradients with central differences
/// (L(p + h) - L(p - h)) / 2h for every parameter. The relative error of a
/// component is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const CnnModel<double>& model, const Tensor4<double>& x,
                           std::span<const std::uint32_t> labels, double step = 1e-5, double tolerance = 1e-4,
                           const GradientFn& gradient = analytic_gradients);

}  // namespace polysketch::tinynn
