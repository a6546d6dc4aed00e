#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "polysketch/error.hpp"

namespace polysketch::tinynn {

/// Batch x channels x height x width, row-major.
template <typename T>
class Tensor4 {
public:
  Tensor4() = default;
  Tensor4(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, T fill = T(0))
      : dims_{batch, channels, height, width}, values_(batch * channels * height * width, fill) {}
  Tensor4(std::array<std::size_t, 4> dims, std::vector<T> values) : dims_(dims), values_(std::move(values)) {
    require(values_.size() == dims_[0] * dims_[1] * dims_[2] * dims_[3], "tensor value count does not match its dims");
  }

  std::size_t batch() const { return dims_[0]; }
  std::size_t channels() const { return dims_[1]; }
  std::size_t height() const { return dims_[2]; }
  std::size_t width() const { return dims_[3]; }
  const std::array<std::size_t, 4>& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * dims_[1] + c) * dims_[2] + y) * dims_[3] + x;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) { return values_[offset(n, c, y, x)]; }
  T operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const { return values_[offset(n, c, y, x)]; }

  // One H x W plane.
  std::span<T> plane(std::size_t n, std::size_t c) { return {values_.data() + offset(n, c, 0, 0), dims_[2] * dims_[3]}; }
  std::span<const T> plane(std::size_t n, std::size_t c) const {
    return {values_.data() + offset(n, c, 0, 0), dims_[2] * dims_[3]};
  }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool operator==(const Tensor4&) const = default;

private:
  std::array<std::size_t, 4> dims_{0, 0, 0, 0};
  std::vector<T> values_;
};

}  // namespace polysketch::tinynn
