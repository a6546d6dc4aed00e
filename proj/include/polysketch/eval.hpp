#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "polysketch/knnpp.hpp"

namespace polysketch::eval {

inline constexpr double kDefaultEmaAlpha = 0.9;
inline constexpr std::size_t kDefaultMostConfused = 5;

/// Rows are true classes, columns the top-1 prediction. Column C (the last)
/// counts samples whose prediction was empty.
class ConfusionMatrix {
public:
  ConfusionMatrix(std::size_t num_classes, std::vector<std::string> label_names = {});

  std::size_t num_classes() const { return num_classes_; }
  std::size_t abstain_column() const { return num_classes_; }

  std::uint64_t& at(std::size_t truth, std::size_t predicted) { return counts_[truth * (num_classes_ + 1) + predicted]; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * (num_classes_ + 1) + predicted];
  }

  std::uint64_t row_total(std::size_t truth) const;
  std::uint64_t total() const;
  // diagonal / row total; meaningless for rows with zero support
  double recall(std::size_t truth) const;

  const std::vector<std::string>& label_names() const { return label_names_; }

private:
  std::size_t num_classes_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::string> label_names_;
};

struct AccuracyReport {
  std::map<std::size_t, double> per_n;
  std::size_t sample_count = 0;
};

// Fraction of samples whose label is among the first min(n, |ranked|) entries.
double top_n_accuracy(std::span<const knnpp::Prediction> predictions, std::span<const std::uint32_t> labels,
                      std::size_t n);

AccuracyReport accuracy_report(std::span<const knnpp::Prediction> predictions, std::span<const std::uint32_t> labels,
                               std::span<const std::size_t> cutoffs);

ConfusionMatrix confusion_matrix(std::span<const knnpp::Prediction> predictions, std::span<const std::uint32_t> labels,
                                 std::size_t num_classes, std::vector<std::string> label_names = {});

/// The m supported classes with the lowest recall, ascending, ties to the lower id.
std::vector<std::uint32_t> most_confused(const ConfusionMatrix& matrix, std::size_t m = kDefaultMostConfused);

/// s_0 = x_0, s_t = alpha * s_{t-1} + (1 - alpha) * x_t.
std::vector<double> ema_smooth(std::span<const double> series, double alpha = kDefaultEmaAlpha);

void write_confusion_csv(const ConfusionMatrix& matrix, const std::filesystem::path& file);
// Two-column `step,value` (or another header pair) CSV.
void write_series_csv(std::span<const double> values, const std::filesystem::path& file,
                      const std::string& index_header = "step", const std::string& value_header = "value",
                      std::size_t first_index = 0);
std::vector<double> read_series_csv(const std::filesystem::path& file);

}  // namespace polysketch::eval
