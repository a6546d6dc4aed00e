#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace polysketch {

/// Seedable generator with a platform-independent output stream.
///
/// Raw bits come from std::mt19937_64, whose sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so every
/// derived quantity (uniform reals, bounded integers, normals) is computed here
/// with a documented formula:
///   - uniform01: top 53 bits of one draw, scaled by 2^-53, in [0, 1).
///   - uniform_index(n): Lemire's multiply-shift with rejection, unbiased.
///   - normal: Box-Muller on two uniform01 draws, the second variate cached.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::size_t uniform_index(std::size_t n);

  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(values[i - 1], values[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& values) {
    shuffle(std::span<T>(values));
  }

private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace polysketch
