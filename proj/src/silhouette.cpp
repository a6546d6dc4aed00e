#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "polysketch/cluster.hpp"
#include "polysketch/csv.hpp"
#include "polysketch/error.hpp"

namespace polysketch::cluster {

SilhouetteReport silhouette(const Matrix& points, std::span<const std::uint32_t> labels) {
  const std::size_t n = points.rows();
  require(n > 0, "silhouette needs at least one point");
  require(labels.size() == n, "silhouette: labels and points differ in length");

  std::map<std::uint32_t, std::size_t> cluster_of_label;
  for (auto l : labels) cluster_of_label.try_emplace(l, 0);
  require(cluster_of_label.size() >= 2, "silhouette needs at least two distinct labels");
  std::size_t next = 0;
  for (auto& [label, idx] : cluster_of_label) idx = next++;
  const std::size_t num_clusters = cluster_of_label.size();

  std::vector<std::size_t> cluster(n);
  std::vector<std::size_t> sizes(num_clusters, 0);
  for (std::size_t i = 0; i < n; ++i) {
    cluster[i] = cluster_of_label[labels[i]];
    ++sizes[cluster[i]];
  }

  SilhouetteReport report;
  report.per_point.resize(n);
  report.cohesion.resize(n);
  report.separation.resize(n);
  std::vector<double> sums(num_clusters);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    const auto xi = points.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[cluster[j]] += std::sqrt(squared_distance(xi, points.row(j)));
    }
    const std::size_t own = cluster[i];
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < num_clusters; ++c)
      if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    report.separation[i] = b;
    if (sizes[own] == 1) {
      report.cohesion[i] = 0.0;
      report.per_point[i] = 0.0;
      continue;
    }
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    report.cohesion[i] = a;
    const double denom = std::max(a, b);
    report.per_point[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  double total = 0.0;
  for (double s : report.per_point) total += s;
  report.overall = total / static_cast<double>(n);
  return report;
}

void write_silhouette_csv(const SilhouetteReport& report, std::span<const std::uint32_t> labels,
                          const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing " + file.string());
  out << "point_index,label,s_i\n";
  for (std::size_t i = 0; i < report.per_point.size(); ++i)
    out << i << ',' << labels[i] << ',' << csv::format_double(report.per_point[i]) << '\n';
  if (!out) throw IoError("write failed: " + file.string());
}

std::vector<CentroidExemplars> exemplars_near_centroids(const data::EmbeddingSet& set, const CentroidModel& model,
                                                        std::size_t class_id, std::size_t top_m) {
  require(class_id < model.num_classes() && class_id < set.num_classes(),
          "class id " + std::to_string(class_id) + " is out of range");
  require(top_m >= 1, "top_m must be at least 1");
  require(set.dim() == model.dim(), "embedding dimension does not match the centroid model");

  const std::size_t k = model.centroids_in_class(class_id);
  std::vector<CentroidExemplars> out(k);
  std::vector<std::vector<Exemplar>> members(k);
  for (std::size_t j = 0; j < k; ++j) out[j].centroid = j;

  for (std::size_t row : set.rows_of_class(static_cast<std::uint32_t>(class_id))) {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const double dist = squared_distance(set.row(row), model.centroid(class_id, j));
      if (dist < best_dist) {
        best_dist = dist;
        best = j;
      }
    }
    members[best].push_back({row, std::sqrt(best_dist)});
  }

  for (std::size_t j = 0; j < k; ++j) {
    auto& list = members[j];
    std::sort(list.begin(), list.end(), [](const Exemplar& a, const Exemplar& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.row < b.row;
    });
    out[j].assigned = list.size();
    out[j].truncated = list.size() < top_m;
    list.resize(std::min(list.size(), top_m));
    out[j].nearest = std::move(list);
  }
  return out;
}

void write_exemplars_csv(std::span<const CentroidExemplars> exemplars, std::size_t class_id,
                         const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing " + file.string());
  out << "class,centroid,rank,row,distance\n";
  for (const auto& ce : exemplars)
    for (std::size_t r = 0; r < ce.nearest.size(); ++r)
      out << class_id << ',' << ce.centroid << ',' << r << ',' << ce.nearest[r].row << ','
          << csv::format_double(ce.nearest[r].distance) << '\n';
  if (!out) throw IoError("write failed: " + file.string());
}

}  // namespace polysketch::cluster
