#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "polysketch/error.hpp"
#include "polysketch/project.hpp"
#include "support.hpp"

using namespace polysketch;
using polysketch::fixtures::TempDir;

namespace {

// Cyclic Jacobi rotations on a symmetric matrix; eigenvalues sorted descending.
std::vector<double> jacobi_eigenvalues(Matrix a) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::ranges::sort(ev, std::greater<>());
  return ev;
}

Matrix covariance(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) mean[k] += x(i, k) / n;
  Matrix cov(d, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) cov(a, b) += (x(i, a) - mean[a]) * (x(i, b) - mean[b]) / (n - 1);
  return cov;
}

double column_variance(const Matrix& x, std::size_t c) {
  double mean = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, c) / x.rows();
  for (std::size_t i = 0; i < x.rows(); ++i) ss += (x(i, c) - mean) * (x(i, c) - mean);
  return ss / (x.rows() - 1);
}

}  // namespace

TEST(Pca, RotatedPlanePreservesTotalVariance) {
  Rng rng(1);
  Matrix x(200, 2);
  for (std::size_t i = 0; i < 200; ++i) {
    const double u = rng.normal(0.0, 3.0), v = rng.normal(0.0, 1.0);
    x(i, 0) = std::cos(0.7) * u - std::sin(0.7) * v;
    x(i, 1) = std::sin(0.7) * u + std::cos(0.7) * v;
  }
  const auto result = project::pca2(x);
  const double before = column_variance(x, 0) + column_variance(x, 1);
  const double after = column_variance(result.projection.coords, 0) + column_variance(result.projection.coords, 1);
  EXPECT_NEAR(after, before, 1e-9 * before);
  EXPECT_NEAR(result.projection.objective, 1.0, 1e-12);
  EXPECT_GE(column_variance(result.projection.coords, 0), column_variance(result.projection.coords, 1));
}

TEST(Pca, LineHasNoSecondAxis) {
  Matrix x(50, 3);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t k = 0; k < 3; ++k) x(i, k) = static_cast<double>(i) * (k + 1.0) + 4.0;
  const auto result = project::pca2(x);
  EXPECT_TRUE(result.rank_deficient);
  EXPECT_NEAR(result.eigenvalues[1], 0.0, 1e-9);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(result.projection.coords(i, 1), 0.0);
}

TEST(Pca, EigenvaluesMatchJacobiAndComponentsAreOrthonormal) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 3 + trial;
    Matrix x(80, d);
    for (std::size_t i = 0; i < 80; ++i)
      for (std::size_t k = 0; k < d; ++k) x(i, k) = rng.normal(0.0, 1.0 + k);
    const auto result = project::pca2(x);
    const auto expected = jacobi_eigenvalues(covariance(x));
    EXPECT_NEAR(result.eigenvalues[0], expected[0], 1e-8 * expected[0]);
    EXPECT_NEAR(result.eigenvalues[1], expected[1], 1e-8 * expected[0]);
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += result.components(a, k) * result.components(b, k);
        EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-10);
      }
    EXPECT_NEAR(column_variance(result.projection.coords, 0), expected[0], 1e-8 * expected[0]);
  }
}

TEST(Pca, DeterministicSigns) {
  Rng rng(3);
  const auto x = fixtures::random_matrix(rng, 30, 4);
  const auto result = project::pca2(x);
  for (std::size_t a = 0; a < 2; ++a) {
    const auto row = result.components.row(a);
    const auto largest = std::ranges::max_element(row, {}, [](double v) { return std::abs(v); });
    EXPECT_GT(*largest, 0.0);
  }
}

TEST(Perplexity, CalibratesToTarget) {
  Rng rng(4);
  const auto x = fixtures::random_matrix(rng, 100, 5);
  const auto cal = project::calibrate_perplexity(x, 15.0);
  EXPECT_EQ(cal.unconverged, 0u);
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_NEAR(cal.achieved_perplexity[i], 15.0, 1e-3);
    double sum = 0.0, entropy = 0.0;
    for (std::size_t j = 0; j < 100; ++j) {
      const double p = cal.conditional(i, j);
      sum += p;
      if (p > 0) entropy -= p * std::log(p);
    }
    EXPECT_EQ(cal.conditional(i, i), 0.0);
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_NEAR(std::exp(entropy), 15.0, 1e-3);
  }
}

TEST(Tsne, EquilateralTriangleStaysEquilateral) {
  // Unit basis vectors: pairwise distances are exactly equal in floating point.
  const Matrix x(3, 3, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto result = project::tsne2(x, {.perplexity = 1.0});
  const auto& y = result.projection.coords;
  const double d01 = std::sqrt(squared_distance(y.row(0), y.row(1)));
  const double d02 = std::sqrt(squared_distance(y.row(0), y.row(2)));
  const double d12 = std::sqrt(squared_distance(y.row(1), y.row(2)));
  const double mean = (d01 + d02 + d12) / 3;
  for (double d : {d01, d02, d12}) EXPECT_NEAR(d, mean, 0.1 * mean);
}

TEST(Tsne, RejectsInfeasiblePerplexity) {
  Rng rng(5);
  const auto x = fixtures::random_matrix(rng, 20, 3);
  EXPECT_THROW(project::tsne2(x, {.perplexity = 30.0}), ValidationError);
}

TEST(Tsne, SeparatesBlobsAndLowersKl) {
  Rng rng(6);
  Matrix means(2, 5);
  means(1, 0) = 20.0;
  const auto blobs = fixtures::gaussian_blobs(rng, means, 30, 1.0);
  const auto result = project::tsne2(blobs.points, {.perplexity = 10.0, .iterations = 400});
  EXPECT_LT(result.final_kl, result.initial_kl);
  // every point is closer to its own blob's embedded centroid
  double cx[2] = {0, 0}, cy[2] = {0, 0};
  for (std::size_t i = 0; i < 60; ++i) {
    cx[blobs.labels[i]] += result.projection.coords(i, 0) / 30;
    cy[blobs.labels[i]] += result.projection.coords(i, 1) / 30;
  }
  for (std::size_t i = 0; i < 60; ++i) {
    const auto l = blobs.labels[i];
    auto dist = [&](int c) { return std::hypot(result.projection.coords(i, 0) - cx[c], result.projection.coords(i, 1) - cy[c]); };
    EXPECT_LT(dist(l), dist(1 - l));
  }
}

TEST(Tsne, DeterministicForSeed) {
  Rng rng(7);
  const auto x = fixtures::random_matrix(rng, 40, 4);
  const project::TsneConfig config{.perplexity = 5.0, .iterations = 100, .seed = 3, .init = project::TsneInit::random};
  EXPECT_EQ(project::tsne2(x, config).projection.coords, project::tsne2(x, config).projection.coords);
}

TEST(Subsample, SortedDistinctAndSeeded) {
  const auto rows = project::subsample_rows(1000, 100, 9);
  ASSERT_EQ(rows.size(), 100u);
  EXPECT_TRUE(std::ranges::is_sorted(rows));
  EXPECT_EQ(std::ranges::adjacent_find(rows), rows.end());
  EXPECT_EQ(project::subsample_rows(1000, 100, 9), rows);
  EXPECT_EQ(project::subsample_rows(10, 100, 9).size(), 10u);
}

TEST(ProjectionCsv, WritesOneRowPerPoint) {
  TempDir dir("proj");
  Rng rng(8);
  const auto set = fixtures::random_set(rng, 12, 3, 2);
  project::write_projection_csv(project::pca2(set).projection, dir / "p.csv");
  const auto text = fixtures::read_file(dir / "p.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "x,y,label_id,label_name");
  EXPECT_EQ(std::ranges::count(text, '\n'), 13);
}
