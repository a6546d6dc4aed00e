#include <algorithm>
#include <cmath>
#include <limits>

#include "polysketch/error.hpp"
#include "polysketch/project.hpp"
#include "polysketch/rng.hpp"

namespace polysketch::project {

namespace {

Matrix pairwise_squared_distances(const Matrix& points) {
  const std::size_t n = points.rows();
  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist(i, j) = dist(j, i) = squared_distance(points.row(i), points.row(j));
  return dist;
}

// Fills row i of `conditional` for the given beta and returns its entropy (nats).
double conditional_row(const Matrix& dist, std::size_t i, double beta, double shift, std::span<double> row) {
  const std::size_t n = dist.rows();
  double sum = 0.0, weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      row[j] = 0.0;
      continue;
    }
    const double shifted = dist(i, j) - shift;
    row[j] = std::exp(-beta * shifted);
    sum += row[j];
    weighted += shifted * row[j];
  }
  for (auto& p : row) p /= sum;
  return std::log(sum) + beta * weighted / sum;
}

double kl_divergence(const Matrix& p, const Matrix& y) {
  const std::size_t n = y.rows();
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) z += 1.0 / (1.0 + squared_distance(y.row(i), y.row(j)));
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      const double q = std::max(1.0 / (1.0 + squared_distance(y.row(i), y.row(j))) / z,
                                std::numeric_limits<double>::min());
      kl += p(i, j) * std::log(p(i, j) / q);
    }
  return kl;
}

Matrix initial_embedding(const Matrix& points, const TsneConfig& config) {
  const std::size_t n = points.rows();
  Matrix y(n, 2);
  if (config.init == TsneInit::pca && points.cols() >= 2) {
    const auto pca = pca2(points);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += pca.projection.coords(i, 0) * pca.projection.coords(i, 0);
    const double stddev = std::sqrt(sq / static_cast<double>(n));
    if (stddev > 0.0) {
      const double scale = config.init_stddev / stddev;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < 2; ++a) y(i, a) = pca.projection.coords(i, a) * scale;
      return y;
    }
  }
  Rng rng(config.seed);
  for (auto& v : y.values()) v = rng.normal(0.0, config.init_stddev);
  return y;
}

}  // namespace

Calibration calibrate_perplexity(const Matrix& points, double perplexity) {
  const std::size_t n = points.rows();
  require(perplexity > 0.0, "perplexity must be positive");
  require(n >= 2, "perplexity calibration needs at least two points");
  const Matrix dist = pairwise_squared_distances(points);
  const double target = std::log(perplexity);
  constexpr double kEntropyTol = 1e-10;
  constexpr std::size_t kMaxSteps = 200;

  Calibration cal{Matrix(n, n), std::vector<double>(n, 1.0), std::vector<double>(n, 0.0), 0};
  for (std::size_t i = 0; i < n; ++i) {
    double shift = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) shift = std::min(shift, dist(i, j));
    double beta = 1.0;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    auto row = cal.conditional.row(i);
    double entropy = conditional_row(dist, i, beta, shift, row);
    for (std::size_t step = 0; step < kMaxSteps && std::abs(entropy - target) > kEntropyTol; ++step) {
      if (entropy > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      entropy = conditional_row(dist, i, beta, shift, row);
    }
    cal.beta[i] = beta;
    cal.achieved_perplexity[i] = std::exp(entropy);
    if (std::abs(entropy - target) > 1e-8) ++cal.unconverged;
  }
  return cal;
}

TsneResult tsne2(const Matrix& points, const TsneConfig& config) {
  const std::size_t n = points.rows();
  require(n >= 3, "tsne2 needs at least 3 points");
  require(n <= kMaxExactTsnePoints, "tsne2: " + std::to_string(n) + " points exceed the exact-gradient limit of " +
                                        std::to_string(kMaxExactTsnePoints) + "; subsample first");
  require(config.perplexity > 0.0 && static_cast<double>(n) >= 3.0 * config.perplexity,
          "tsne2: perplexity " + std::to_string(config.perplexity) + " is infeasible for " + std::to_string(n) +
              " points (need n >= 3 * perplexity)");
  require(config.iterations >= 1, "tsne2: iterations must be at least 1");
  require(all_finite(points.values()), "tsne2: points must be finite");

  const auto cal = calibrate_perplexity(points, config.perplexity);
  Matrix p(n, n);
  double p_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      p(i, j) = cal.conditional(i, j) + cal.conditional(j, i);
      p_sum += p(i, j);
    }
  for (auto& v : p.values()) v = std::max(v / p_sum, 1e-12);
  for (std::size_t i = 0; i < n; ++i) p(i, i) = 0.0;

  Matrix y = initial_embedding(points, config);
  TsneResult result;
  result.initial_kl = kl_divergence(p, y);

  Matrix velocity(n, 2), gains(n, 2, 1.0), grad(n, 2);
  Matrix num(n, n);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const double exaggeration = it < config.exaggeration_iters ? config.early_exaggeration : 1.0;
    const double momentum = it < config.momentum_switch_iter ? config.initial_momentum : config.final_momentum;

    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = 1.0 / (1.0 + squared_distance(y.row(i), y.row(j)));
        num(i, j) = num(j, i) = v;
        z += 2.0 * v;
      }
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double coeff = (exaggeration * p(i, j) - num(i, j) / z) * num(i, j);
        gx += coeff * (y(i, 0) - y(j, 0));
        gy += coeff * (y(i, 1) - y(j, 1));
      }
      grad(i, 0) = 4.0 * gx;
      grad(i, 1) = 4.0 * gy;
    }
    for (std::size_t k = 0; k < y.values().size(); ++k) {
      double& g = gains.values()[k];
      double& u = velocity.values()[k];
      const double dk = grad.values()[k];
      g = (dk > 0.0) != (u > 0.0) ? g + 0.2 : g * 0.8;
      g = std::max(g, 0.01);
      u = momentum * u - config.learning_rate * g * dk;
      y.values()[k] += u;
    }
    for (std::size_t a = 0; a < 2; ++a) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y(i, a);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y(i, a) -= mean;
    }
  }
  require(all_finite(y.values()), "tsne2: optimisation diverged");

  result.final_kl = kl_divergence(p, y);
  result.unconverged_rows = cal.unconverged;
  result.achieved_perplexity = cal.achieved_perplexity;
  result.projection.coords = std::move(y);
  result.projection.method = Method::tsne;
  result.projection.objective = result.final_kl;
  return result;
}

TsneResult tsne2(const data::EmbeddingSet& set, const TsneConfig& config) {
  auto result = tsne2(set.to_matrix(), config);
  result.projection.labels.assign(set.labels().begin(), set.labels().end());
  result.projection.label_names = set.label_names();
  return result;
}

}  // namespace polysketch::project
