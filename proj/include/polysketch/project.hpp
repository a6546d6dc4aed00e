#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polysketch/data.hpp"
#include "polysketch/matrix.hpp"

namespace polysketch::project {

enum class Method { pca, tsne };

/// n x 2 coordinates of a projected embedding set.
struct Projection2D {
  Matrix coords;
  std::vector<std::uint32_t> labels;
  std::vector<std::string> label_names;
  Method method = Method::pca;
  // tsne: final KL divergence; pca: fraction of variance on the two axes.
  double objective = 0.0;
};

struct PcaResult {
  Projection2D projection;
  Matrix components;                  // 2 x d, orthonormal rows
  std::vector<double> eigenvalues;    // top two covariance eigenvalues
  bool rank_deficient = false;        // second axis carried (near) zero variance
};

/// Projection onto the top two principal axes of the centred data. Each axis
/// is flipped so that its largest-magnitude loading is positive. With rank
/// below 2 the second coordinate is zero and the result is flagged.
PcaResult pca2(const data::EmbeddingSet& set);
PcaResult pca2(const Matrix& points);

enum class TsneInit { pca, random };

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iter = 250;
  TsneInit init = TsneInit::pca;
  double init_stddev = 1e-4;
};

inline constexpr std::size_t kMaxExactTsnePoints = 10000;
inline constexpr std::size_t kDefaultTsneSubsample = 5000;

struct Calibration {
  Matrix conditional;                    // row i: p_{j|i}
  std::vector<double> beta;              // 1 / (2 sigma_i^2)
  std::vector<double> achieved_perplexity;
  std::size_t unconverged = 0;           // rows whose bisection missed the target
};

/// Per-point Gaussian bandwidth search by bisection on beta until the
/// conditional distribution's perplexity matches the target.
Calibration calibrate_perplexity(const Matrix& points, double perplexity);

struct TsneResult {
  Projection2D projection;
  double initial_kl = 0.0;
  double final_kl = 0.0;
  std::size_t unconverged_rows = 0;
  std::vector<double> achieved_perplexity;
};

/// Exact O(n^2) t-SNE in two dimensions.
TsneResult tsne2(const Matrix& points, const TsneConfig& config);
TsneResult tsne2(const data::EmbeddingSet& set, const TsneConfig& config);

// Seeded subset of at most max_points row indices, ascending.
std::vector<std::size_t> subsample_rows(std::size_t n, std::size_t max_points, std::uint64_t seed);

// CSV `x,y,label_id,label_name`.
void write_projection_csv(const Projection2D& projection, const std::filesystem::path& file);

}  // namespace polysketch::project
