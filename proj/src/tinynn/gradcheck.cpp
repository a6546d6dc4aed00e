#include "polysketch/tinynn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "polysketch/error.hpp"

namespace polysketch::tinynn {

Parameters<double> analytic_gradients(const CnnModel<double>& model, const Tensor4<double>& x,
                                      std::span<const std::uint32_t> labels) {
  return backward(model, x, labels).gradients;
}

GradCheckReport grad_check(const CnnModel<double>& model, const Tensor4<double>& x,
                           std::span<const std::uint32_t> labels, double step, double tolerance,
                           const GradientFn& gradient) {
  require(step > 0.0, "grad_check: step must be positive");
  const auto analytic = gradient(model, x, labels);
  const auto names = parameter_names(model.config());
  require(analytic.tensors.size() == names.size(), "grad_check: gradient has the wrong number of tensors");

  GradCheckReport report;
  report.step = step;
  report.tolerance = tolerance;
  CnnModel<double> probe = model;
  for (std::size_t t = 0; t < names.size(); ++t) {
    auto& values = probe.parameters().tensors[t];
    require(analytic.tensors[t].size() == values.size(), "grad_check: gradient shape mismatch for " + names[t]);
    TensorCheck check{names[t], values.size(), 0.0, 0.0};
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double up = batch_loss(probe, x, labels);
      values[i] = original - step;
      const double down = batch_loss(probe, x, labels);
      values[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.tensors[t][i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-8});
      check.max_absolute_error = std::max(check.max_absolute_error, abs_err);
      check.max_relative_error = std::max(check.max_relative_error, rel_err);
    }
    report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
    report.tensors.push_back(std::move(check));
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace polysketch::tinynn
