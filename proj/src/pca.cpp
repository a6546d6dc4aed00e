#include <cmath>
#include <fstream>

#include <Eigen/Dense>

#include "polysketch/csv.hpp"
#include "polysketch/error.hpp"
#include "polysketch/project.hpp"
#include "polysketch/rng.hpp"

namespace polysketch::project {

PcaResult pca2(const Matrix& points) {
  const std::size_t n = points.rows(), d = points.cols();
  require(n >= 3, "pca2 needs at least 3 points");
  require(d >= 2, "pca2 needs at least 2 dimensions");
  require(all_finite(points.values()), "pca2: points must be finite");

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> x(points.values().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centred = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  require(solver.info() == Eigen::Success, "pca2: eigendecomposition failed");
  // Eigen sorts eigenvalues ascending.
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();
  const double trace = cov.trace();

  PcaResult result;
  result.components = Matrix(2, d);
  for (std::size_t a = 0; a < 2; ++a) {
    const auto col = static_cast<Eigen::Index>(d - 1 - a);
    result.eigenvalues.push_back(std::max(values(col), 0.0));
    Eigen::VectorXd axis = vectors.col(col);
    Eigen::Index peak = 0;
    for (Eigen::Index i = 1; i < axis.size(); ++i)
      if (std::abs(axis(i)) > std::abs(axis(peak))) peak = i;
    if (axis(peak) < 0) axis = -axis;
    for (std::size_t i = 0; i < d; ++i) result.components(a, i) = axis(static_cast<Eigen::Index>(i));
  }
  const double negligible = 1e-12 * std::max(trace, 0.0);
  result.rank_deficient = !(result.eigenvalues[1] > negligible);

  auto& proj = result.projection;
  proj.method = Method::pca;
  proj.coords = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < 2; ++a) {
      if (a == 1 && result.rank_deficient) continue;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += centred(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * result.components(a, j);
      proj.coords(i, a) = dot;
    }
  if (result.rank_deficient) {
    result.eigenvalues[1] = 0.0;
    for (std::size_t j = 0; j < d; ++j) result.components(1, j) = 0.0;
  }
  proj.objective = trace > 0.0 ? (result.eigenvalues[0] + result.eigenvalues[1]) / trace : 0.0;
  return result;
}

PcaResult pca2(const data::EmbeddingSet& set) {
  auto result = pca2(set.to_matrix());
  result.projection.labels.assign(set.labels().begin(), set.labels().end());
  result.projection.label_names = set.label_names();
  return result;
}

std::vector<std::size_t> subsample_rows(std::size_t n, std::size_t max_points, std::uint64_t seed) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  if (n <= max_points) return rows;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(rows));
  rows.resize(max_points);
  std::sort(rows.begin(), rows.end());
  return rows;
}

void write_projection_csv(const Projection2D& projection, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing " + file.string());
  out << "x,y,label_id,label_name\n";
  for (std::size_t i = 0; i < projection.coords.rows(); ++i) {
    const auto label = i < projection.labels.size() ? projection.labels[i] : 0u;
    const std::string name = label < projection.label_names.size() ? projection.label_names[label] : "";
    out << csv::format_double(projection.coords(i, 0)) << ',' << csv::format_double(projection.coords(i, 1)) << ','
        << label << ',' << csv::escape(name) << '\n';
  }
  if (!out) throw IoError("write failed: " + file.string());
}

}  // namespace polysketch::project
