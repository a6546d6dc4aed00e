#include "polysketch/knnpp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "polysketch/csv.hpp"
#include "polysketch/error.hpp"

namespace polysketch::knnpp {

double vote_weight(double distance, double epsilon) {
  require(distance >= 0.0, "vote_weight: distance must be non-negative");
  require(epsilon > 0.0, "vote_weight: epsilon must be positive");
  return 1.0 / std::sqrt(std::max(distance, epsilon));
}

namespace {

struct Candidate {
  double distance;
  std::size_t pooled;
  std::uint32_t class_id;
};

}  // namespace

Prediction classify(std::span<const float> query, const cluster::CentroidModel& model, const VotingConfig& config) {
  require(model.num_classes() > 0, "centroid model is empty");
  require(query.size() == model.dim(), "query dimension " + std::to_string(query.size()) +
                                           " does not match model dimension " + std::to_string(model.dim()));
  require(config.epsilon > 0.0, "epsilon must be positive");
  const std::size_t total = model.total_centroids();
  require(config.k_neighbors >= 1 && config.k_neighbors <= total,
          "k_neighbors must lie in [1, " + std::to_string(total) + "]");

  std::vector<Candidate> candidates;
  candidates.reserve(total);
  for (std::uint32_t c = 0; c < model.num_classes(); ++c)
    for (std::size_t j = 0; j < model.centroids_in_class(c); ++j)
      candidates.push_back({std::sqrt(squared_distance(query, model.centroid(c, j))), candidates.size(), c});

  const auto k = static_cast<std::ptrdiff_t>(config.k_neighbors);
  std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end(),
                    [](const Candidate& a, const Candidate& b) {
                      return a.distance != b.distance ? a.distance < b.distance : a.pooled < b.pooled;
                    });

  std::vector<double> scores(model.num_classes(), 0.0);
  std::vector<bool> voted(model.num_classes(), false);
  for (std::ptrdiff_t r = 0; r < k; ++r) {
    scores[candidates[r].class_id] += vote_weight(candidates[r].distance, config.epsilon);
    voted[candidates[r].class_id] = true;
  }

  Prediction prediction;
  for (std::uint32_t c = 0; c < scores.size(); ++c)
    if (voted[c]) prediction.ranked.push_back({c, scores[c]});
  std::stable_sort(prediction.ranked.begin(), prediction.ranked.end(),
                   [](const ClassScore& a, const ClassScore& b) { return a.score > b.score; });
  return prediction;
}

std::vector<Prediction> classify_batch(const data::EmbeddingSet& set, const cluster::CentroidModel& model,
                                       const VotingConfig& config) {
  if (set.size() > 0)
    require(set.dim() == model.dim(), "embedding dimension " + std::to_string(set.dim()) +
                                          " does not match model dimension " + std::to_string(model.dim()));
  std::vector<Prediction> out;
  out.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto p = classify(set.row(i), model, config);
    p.query_index = i;
    out.push_back(std::move(p));
  }
  return out;
}

void write_predictions_csv(std::span<const Prediction> predictions, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing " + file.string());
  out << "query_index,rank,class_id,score\n";
  for (std::size_t q = 0; q < predictions.size(); ++q) {
    const auto& p = predictions[q];
    const std::size_t index = p.query_index.value_or(q);
    // A query that received no votes still gets a line so that row counts line up.
    if (p.ranked.empty()) out << index << ",0,,\n";
    for (std::size_t r = 0; r < p.ranked.size(); ++r)
      out << index << ',' << r << ',' << p.ranked[r].class_id << ',' << csv::format_double(p.ranked[r].score, 9)
          << '\n';
  }
  if (!out) throw IoError("write failed: " + file.string());
}

namespace {

template <typename T>
T parse_number(const std::string& text, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ValidationError("predictions line " + std::to_string(line) + ": cannot parse '" + text + "'");
  return value;
}

}  // namespace

std::vector<Prediction> read_predictions_csv(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) throw IoError("missing " + file.string());
  const auto rows = csv::read_file(file);
  require(!rows.empty() && rows[0] == csv::Row{"query_index", "rank", "class_id", "score"},
          file.string() + ": header must be query_index,rank,class_id,score");
  std::map<std::size_t, Prediction> by_query;
  for (std::size_t line = 1; line < rows.size(); ++line) {
    const auto& row = rows[line];
    require(row.size() == 4, file.string() + ": line " + std::to_string(line) + " must have 4 fields");
    const auto q = parse_number<std::size_t>(row[0], line);
    const auto rank = parse_number<std::size_t>(row[1], line);
    auto& p = by_query[q];
    p.query_index = q;
    if (row[2].empty()) continue;
    require(rank == p.ranked.size(), file.string() + ": ranks for query " + std::to_string(q) + " are not consecutive");
    p.ranked.push_back({parse_number<std::uint32_t>(row[2], line), parse_number<double>(row[3], line)});
  }
  std::vector<Prediction> out;
  out.reserve(by_query.size());
  std::size_t expected = 0;
  for (auto& [q, p] : by_query) {
    require(q == expected++, file.string() + ": query indices must be 0..n-1 without gaps");
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace polysketch::knnpp
