#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "polysketch/matrix.hpp"

namespace polysketch::data {

inline constexpr int kFormatVersion = 1;
inline constexpr double kDefaultGuessThreshold = 0.1;
inline constexpr std::size_t kDefaultHistogramBins = 10;

/// Per-drawing metadata: who drew it and how many players recognised it.
struct SampleMeta {
  std::string sample_id;
  std::uint32_t label_id = 0;
  double guess_rate = 0.0;

  bool operator==(const SampleMeta&) const = default;
};

/// N embedding rows of dimension D with one class label per row.
///
/// Invariants are checked on construction: data.size() == n * d, every value
/// finite, every label < label_names.size(). Instances are immutable.
class EmbeddingSet {
public:
  EmbeddingSet() = default;
  EmbeddingSet(std::size_t d, std::vector<float> data, std::vector<std::uint32_t> labels,
               std::vector<std::string> label_names);

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return d_; }
  std::size_t num_classes() const { return label_names_.size(); }

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * d_, d_}; }
  std::uint32_t label(std::size_t i) const { return labels_[i]; }

  std::span<const float> data() const { return data_; }
  std::span<const std::uint32_t> labels() const { return labels_; }
  const std::vector<std::string>& label_names() const { return label_names_; }

  // Rows in the given order (duplicates allowed).
  EmbeddingSet select(std::span<const std::size_t> rows) const;

  std::vector<std::size_t> rows_of_class(std::uint32_t c) const;
  std::vector<std::size_t> class_counts() const;

  // Double-precision copy of the given rows (all rows when empty).
  Matrix to_matrix() const;
  Matrix to_matrix(std::span<const std::size_t> rows) const;

  bool operator==(const EmbeddingSet&) const = default;

private:
  std::size_t d_ = 0;
  std::vector<float> data_;
  std::vector<std::uint32_t> labels_;
  std::vector<std::string> label_names_;
};

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t classes = 0;
};

/// Distribution of class sizes: how many classes fall in each size range.
struct ClassHistogram {
  std::vector<std::size_t> counts;  // samples per class
  std::vector<HistogramBin> bins;
};

struct SplitSpec {
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitResult {
  EmbeddingSet train;
  EmbeddingSet val;
  EmbeddingSet test;
};

// Storage ------------------------------------------------------------------

EmbeddingSet load_embedding_set(const std::filesystem::path& dir);
void save_embedding_set(const EmbeddingSet& set, const std::filesystem::path& dir);

// CSV with header `label,<feature columns>`; label names in order of first appearance.
EmbeddingSet load_embedding_csv(const std::filesystem::path& file);

// Directory (meta.json present) or .csv file.
EmbeddingSet load_any(const std::filesystem::path& path);

std::vector<SampleMeta> load_sample_metas(const std::filesystem::path& csv_file);
void save_sample_metas(std::span<const SampleMeta> metas, const std::filesystem::path& csv_file);

// Pipeline steps -----------------------------------------------------------

EmbeddingSet clean_by_guess_rate(const EmbeddingSet& set, std::span<const SampleMeta> metas,
                                 double threshold = kDefaultGuessThreshold);

// Indices of the rows clean_by_guess_rate keeps.
std::vector<std::size_t> rows_passing_guess_rate(std::span<const SampleMeta> metas, double threshold);

/// Up-samples every class to the largest class count by drawing extra rows
/// uniformly with replacement from the same class. Original rows keep their
/// order; added rows follow, grouped by ascending class id.
EmbeddingSet rebalance_classes(const EmbeddingSet& set, std::uint64_t seed);

SplitResult split(const EmbeddingSet& set, const SplitSpec& spec);

/// Stratified partition of row indices into parts with the given fractions.
///
/// Rows are shuffled within each class and the classes concatenated. Walking
/// that sequence, position p is held out of part 0 whenever the running quota
/// floor((p + 1) * F) advances, F being the summed share of parts 1..k; the
/// held-out positions are divided among parts 1..k by the same rule applied
/// recursively. Every class therefore keeps within one row of its
/// proportional part-0 share, and each part's global size is within one row
/// of n * fraction. Indices in each part are returned ascending.
std::vector<std::vector<std::size_t>> stratified_partition(std::span<const std::uint32_t> labels,
                                                           std::span<const double> fractions,
                                                           std::uint64_t seed);

ClassHistogram class_histogram(const EmbeddingSet& set, std::size_t bins = kDefaultHistogramBins);

}  // namespace polysketch::data
