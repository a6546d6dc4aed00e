#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "polysketch/cluster.hpp"
#include "polysketch/error.hpp"
#include "polysketch/rng.hpp"

namespace polysketch::cluster {

void KMeansConfig::validate() const {
  require(k >= 1, "k must be at least 1");
  require(max_iters >= 1, "max_iters must be at least 1");
  require(restarts >= 1, "restarts must be at least 1");
  require(tol >= 0.0 && std::isfinite(tol), "tol must be a non-negative finite number");
}

std::pair<std::size_t, double> nearest_centroid(const Matrix& centroids, std::span<const double> point) {
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.rows(); ++j) {
    const double dist = squared_distance(centroids.row(j), point);
    if (dist < best_dist) {
      best_dist = dist;
      best = j;
    }
  }
  return {best, best_dist};
}

std::vector<std::size_t> kmeanspp_seed_indices(const Matrix& points, std::size_t k, std::uint64_t seed) {
  const std::size_t n = points.rows();
  require(k >= 1, "k must be at least 1");
  require(k <= n, "k = " + std::to_string(k) + " exceeds the number of points " + std::to_string(n));
  require(all_finite(points.values()), "points must be finite");

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  std::vector<bool> taken(n, false);
  std::vector<double> weight(n, std::numeric_limits<double>::infinity());

  auto take = [&](std::size_t idx) {
    chosen.push_back(idx);
    taken[idx] = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) {
        weight[i] = 0.0;
        continue;
      }
      weight[i] = std::min(weight[i], squared_distance(points.row(i), points.row(idx)));
    }
  };

  take(rng.uniform_index(n));
  while (chosen.size() < k) {
    const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
    if (!(total > 0.0)) {
      // Remaining points coincide with chosen centers; pick uniformly among the untaken ones.
      std::size_t pick = rng.uniform_index(n - chosen.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (pick-- == 0) {
          take(i);
          break;
        }
      }
      continue;
    }
    const double target = rng.uniform01() * total;
    double cumulative = 0.0;
    std::size_t pick = n;
    std::size_t last_positive = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (weight[i] <= 0.0) continue;
      last_positive = i;
      cumulative += weight[i];
      if (cumulative > target) {
        pick = i;
        break;
      }
    }
    take(pick < n ? pick : last_positive);
  }
  return chosen;
}

Matrix kmeanspp_seed(const Matrix& points, std::size_t k, std::uint64_t seed) {
  const auto indices = kmeanspp_seed_indices(points, k, seed);
  Matrix seeds(k, points.cols());
  for (std::size_t j = 0; j < k; ++j) std::copy_n(points.row(indices[j]).begin(), points.cols(), seeds.row(j).begin());
  return seeds;
}

namespace {

double assign(const Matrix& points, const Matrix& centroids, std::vector<std::size_t>& assignments) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto [j, dist] = nearest_centroid(centroids, points.row(i));
    assignments[i] = j;
    inertia += dist;
  }
  return inertia;
}

void update_centroids(const Matrix& points, const std::vector<std::size_t>& assignments, Matrix& centroids) {
  const std::size_t k = centroids.rows();
  const std::size_t d = points.cols();
  std::vector<std::size_t> counts(k, 0);
  Matrix sums(k, d);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    auto dst = sums.row(assignments[i]);
    auto src = points.row(i);
    for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    ++counts[assignments[i]];
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 0) continue;
    auto dst = centroids.row(j);
    for (std::size_t c = 0; c < d; ++c) dst[c] = sums(j, c) / static_cast<double>(counts[j]);
  }

  // Re-seed each empty cluster at the point farthest from its centroid,
  // never draining a cluster down to zero members.
  std::vector<std::size_t> owner = assignments;
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] != 0) continue;
    std::size_t far = points.rows();
    double far_dist = -1.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
      if (counts[owner[i]] < 2) continue;
      const double dist = squared_distance(points.row(i), std::span<const double>(centroids.row(owner[i])));
      if (dist > far_dist) {
        far_dist = dist;
        far = i;
      }
    }
    if (far == points.rows()) continue;
    --counts[owner[far]];
    owner[far] = j;
    counts[j] = 1;
    std::copy_n(points.row(far).begin(), d, centroids.row(j).begin());
  }
}

KMeansResult run_once(const Matrix& points, const KMeansConfig& config, std::uint64_t seed) {
  KMeansResult result;
  result.centroids = kmeanspp_seed(points, config.k, seed);
  result.assignments.assign(points.rows(), 0);
  double previous = 0.0;
  for (std::size_t it = 0;; ++it) {
    result.inertia = assign(points, result.centroids, result.assignments);
    result.inertia_trace.push_back(result.inertia);
    result.iterations = it + 1;
    const bool converged = it > 0 && (previous <= 0.0 || (previous - result.inertia) < config.tol * previous);
    if (converged || result.iterations >= config.max_iters) break;
    update_centroids(points, result.assignments, result.centroids);
    previous = result.inertia;
  }
  return result;
}

}  // namespace

KMeansResult lloyd_fit(const Matrix& points, const KMeansConfig& config) {
  config.validate();
  require(config.k <= points.rows(),
          "k = " + std::to_string(config.k) + " exceeds the number of points " + std::to_string(points.rows()));
  require(all_finite(points.values()), "points must be finite");

  KMeansResult best;
  for (std::size_t r = 0; r < config.restarts; ++r) {
    auto result = run_once(points, config, config.seed + r);
    if (r == 0 || result.inertia < best.inertia) best = std::move(result);
  }
  return best;
}

}  // namespace polysketch::cluster
