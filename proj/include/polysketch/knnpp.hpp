#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "polysketch/cluster.hpp"
#include "polysketch/data.hpp"

namespace polysketch::knnpp {

inline constexpr std::size_t kDefaultNeighbors = 9;
inline constexpr double kDefaultEpsilon = 1e-12;

struct VotingConfig {
  std::size_t k_neighbors = kDefaultNeighbors;
  double epsilon = kDefaultEpsilon;  // lower clamp on the distance before weighting
};

struct ClassScore {
  std::uint32_t class_id = 0;
  double score = 0.0;

  bool operator==(const ClassScore&) const = default;
};

/// Classes ranked by summed vote weight, highest first.
struct Prediction {
  std::vector<ClassScore> ranked;
  std::optional<std::size_t> query_index;

  bool operator==(const Prediction&) const = default;
};

// 1 / sqrt(max(distance, epsilon)).
double vote_weight(double distance, double epsilon = kDefaultEpsilon);

/// Votes among the k_neighbors centroids nearest to the query.
///
/// Centroids are pooled in class order (all of class 0, then class 1, ...).
/// Each of the k nearest by Euclidean distance (ties to the lower pooled
/// index) adds vote_weight(distance) to its class, summed in rank order.
/// Classes are ranked by score, ties to the lower class id; classes with no
/// votes are left out.
Prediction classify(std::span<const float> query, const cluster::CentroidModel& model, const VotingConfig& config);

std::vector<Prediction> classify_batch(const data::EmbeddingSet& set, const cluster::CentroidModel& model,
                                       const VotingConfig& config);

// CSV `query_index,rank,class_id,score`, scores at 9 significant digits.
void write_predictions_csv(std::span<const Prediction> predictions, const std::filesystem::path& file);
std::vector<Prediction> read_predictions_csv(const std::filesystem::path& file);

}  // namespace polysketch::knnpp
