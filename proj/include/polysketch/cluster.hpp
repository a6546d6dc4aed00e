#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "polysketch/data.hpp"
#include "polysketch/matrix.hpp"

namespace polysketch::cluster {

inline constexpr std::size_t kDefaultCentroidsPerClass = 3;
inline constexpr std::size_t kDefaultExemplarsPerCentroid = 4;

struct KMeansConfig {
  std::size_t k = kDefaultCentroidsPerClass;
  std::size_t max_iters = 300;
  double tol = 1e-6;  // relative inertia improvement
  std::size_t restarts = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct KMeansResult {
  Matrix centroids;
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
  std::size_t iterations = 0;
  // Inertia after each assignment step of the winning restart.
  std::vector<double> inertia_trace;
};

/// D^2 seeding: first center uniform, each further center drawn with
/// probability proportional to the squared distance to its nearest chosen
/// center. Returns copies of the chosen rows.
Matrix kmeanspp_seed(const Matrix& points, std::size_t k, std::uint64_t seed);

// Row indices picked by kmeanspp_seed, in pick order.
std::vector<std::size_t> kmeanspp_seed_indices(const Matrix& points, std::size_t k, std::uint64_t seed);

/// Lloyd iterations from k-means++ seeds, best of `restarts` by inertia.
///
/// Restart r is seeded with seed + r. A run stops after max_iters
/// assignment steps or once the relative inertia improvement drops below
/// tol. An emptied cluster is re-seeded at the point farthest from its
/// assigned centroid. Ties in assignment go to the lowest centroid index.
KMeansResult lloyd_fit(const Matrix& points, const KMeansConfig& config);

// Nearest centroid (lowest index on ties) and its squared distance.
std::pair<std::size_t, double> nearest_centroid(const Matrix& centroids, std::span<const double> point);

/// Per-class sub-cluster centroids. Stored in binary32 so the in-memory
/// model is exactly what gets persisted.
class CentroidModel {
public:
  CentroidModel() = default;
  CentroidModel(std::size_t d, std::vector<std::vector<float>> centroids_per_class,
                std::vector<std::string> label_names);

  std::size_t dim() const { return d_; }
  std::size_t num_classes() const { return label_names_.size(); }
  std::size_t centroids_in_class(std::size_t c) const { return centroids_[c].size() / d_; }
  std::size_t total_centroids() const;

  std::span<const float> centroid(std::size_t c, std::size_t j) const {
    return {centroids_[c].data() + j * d_, d_};
  }
  std::span<const float> class_centroids(std::size_t c) const { return centroids_[c]; }
  const std::vector<std::string>& label_names() const { return label_names_; }

  bool operator==(const CentroidModel&) const = default;

private:
  std::size_t d_ = 0;
  std::vector<std::vector<float>> centroids_;
  std::vector<std::string> label_names_;
};

CentroidModel fit_class_centroids(const data::EmbeddingSet& set, std::size_t k_per_class, KMeansConfig config);

void save_centroid_model(const CentroidModel& model, const std::filesystem::path& dir);
CentroidModel load_centroid_model(const std::filesystem::path& dir);

struct SilhouetteReport {
  std::vector<double> per_point;
  std::vector<double> cohesion;    // a_i: mean distance to the rest of the own cluster
  std::vector<double> separation;  // b_i: mean distance to the closest other cluster
  double overall = 0.0;
};

/// Euclidean silhouette with the given labels taken as the clustering.
/// Points in singleton clusters score 0.
SilhouetteReport silhouette(const Matrix& points, std::span<const std::uint32_t> labels);

void write_silhouette_csv(const SilhouetteReport& report, std::span<const std::uint32_t> labels,
                          const std::filesystem::path& file);

struct Exemplar {
  std::size_t row = 0;  // index into the embedding set
  double distance = 0.0;
};

struct CentroidExemplars {
  std::size_t centroid = 0;
  std::vector<Exemplar> nearest;  // ascending distance, ties by row index
  std::size_t assigned = 0;       // class rows whose nearest centroid this is
  bool truncated = false;         // fewer than top_m rows were assigned here
};

/// For every centroid of `class_id`, the top_m class rows closest to it among
/// the rows whose nearest centroid it is.
std::vector<CentroidExemplars> exemplars_near_centroids(const data::EmbeddingSet& set, const CentroidModel& model,
                                                        std::size_t class_id,
                                                        std::size_t top_m = kDefaultExemplarsPerCentroid);

void write_exemplars_csv(std::span<const CentroidExemplars> exemplars, std::size_t class_id,
                         const std::filesystem::path& file);

}  // namespace polysketch::cluster
