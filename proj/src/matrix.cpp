#include "polysketch/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace polysketch {

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace polysketch
