#include "polysketch/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "polysketch/csv.hpp"
#include "polysketch/error.hpp"

namespace polysketch::eval {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::vector<std::string> label_names)
    : num_classes_(num_classes),
      counts_(num_classes * (num_classes + 1), 0),
      label_names_(std::move(label_names)) {
  require(num_classes >= 1, "confusion matrix needs at least one class");
  if (label_names_.empty())
    for (std::size_t c = 0; c < num_classes; ++c) label_names_.push_back(std::to_string(c));
  require(label_names_.size() == num_classes, "confusion matrix: label name count differs from class count");
}

std::uint64_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::uint64_t sum = 0;
  for (std::size_t p = 0; p <= num_classes_; ++p) sum += at(truth, p);
  return sum;
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

double ConfusionMatrix::recall(std::size_t truth) const {
  const auto support = row_total(truth);
  return support == 0 ? 0.0 : static_cast<double>(at(truth, truth)) / static_cast<double>(support);
}

double top_n_accuracy(std::span<const knnpp::Prediction> predictions, std::span<const std::uint32_t> labels,
                      std::size_t n) {
  require(predictions.size() == labels.size(), "top_n_accuracy: " + std::to_string(predictions.size()) +
                                                   " predictions but " + std::to_string(labels.size()) + " labels");
  require(!predictions.empty(), "top_n_accuracy: no samples");
  require(n >= 1, "top_n_accuracy: n must be at least 1");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& ranked = predictions[i].ranked;
    const auto end = ranked.begin() + static_cast<std::ptrdiff_t>(std::min(n, ranked.size()));
    if (std::any_of(ranked.begin(), end, [&](const knnpp::ClassScore& s) { return s.class_id == labels[i]; })) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

AccuracyReport accuracy_report(std::span<const knnpp::Prediction> predictions, std::span<const std::uint32_t> labels,
                               std::span<const std::size_t> cutoffs) {
  AccuracyReport report;
  report.sample_count = predictions.size();
  for (auto n : cutoffs) report.per_n[n] = top_n_accuracy(predictions, labels, n);
  return report;
}

ConfusionMatrix confusion_matrix(std::span<const knnpp::Prediction> predictions, std::span<const std::uint32_t> labels,
                                 std::size_t num_classes, std::vector<std::string> label_names) {
  require(predictions.size() == labels.size(), "confusion_matrix: predictions and labels differ in length");
  ConfusionMatrix matrix(num_classes, std::move(label_names));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < num_classes, "confusion_matrix: label " + std::to_string(labels[i]) + " out of range");
    const auto& ranked = predictions[i].ranked;
    if (ranked.empty()) {
      ++matrix.at(labels[i], matrix.abstain_column());
      continue;
    }
    require(ranked.front().class_id < num_classes,
            "confusion_matrix: predicted class " + std::to_string(ranked.front().class_id) + " out of range");
    ++matrix.at(labels[i], ranked.front().class_id);
  }
  return matrix;
}

std::vector<std::uint32_t> most_confused(const ConfusionMatrix& matrix, std::size_t m) {
  require(m <= matrix.num_classes(), "most_confused: m exceeds the class count");
  std::vector<std::uint32_t> supported;
  for (std::uint32_t c = 0; c < matrix.num_classes(); ++c)
    if (matrix.row_total(c) > 0) supported.push_back(c);
  require(!supported.empty(), "most_confused: every class has zero support");
  std::vector<double> recall(matrix.num_classes());
  for (auto c : supported) recall[c] = matrix.recall(c);
  std::stable_sort(supported.begin(), supported.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return recall[a] < recall[b]; });
  supported.resize(std::min(m, supported.size()));
  return supported;
}

std::vector<double> ema_smooth(std::span<const double> series, double alpha) {
  require(!series.empty(), "ema_smooth: empty series");
  require(alpha >= 0.0 && alpha < 1.0, "ema_smooth: alpha must lie in [0, 1)");
  std::vector<double> out(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    require(std::isfinite(series[t]), "ema_smooth: non-finite value at step " + std::to_string(t));
    out[t] = t == 0 ? series[0] : alpha * out[t - 1] + (1.0 - alpha) * series[t];
  }
  return out;
}

void write_confusion_csv(const ConfusionMatrix& matrix, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing " + file.string());
  std::vector<std::string> header{"true\\predicted"};
  header.insert(header.end(), matrix.label_names().begin(), matrix.label_names().end());
  header.emplace_back("(abstain)");
  csv::write_row(out, header);
  for (std::size_t t = 0; t < matrix.num_classes(); ++t) {
    std::vector<std::string> row{matrix.label_names()[t]};
    for (std::size_t p = 0; p <= matrix.num_classes(); ++p) row.push_back(std::to_string(matrix.at(t, p)));
    csv::write_row(out, row);
  }
  if (!out) throw IoError("write failed: " + file.string());
}

void write_series_csv(std::span<const double> values, const std::filesystem::path& file,
                      const std::string& index_header, const std::string& value_header, std::size_t first_index) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing " + file.string());
  out << index_header << ',' << value_header << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) out << first_index + i << ',' << csv::format_double(values[i]) << '\n';
  if (!out) throw IoError("write failed: " + file.string());
}

std::vector<double> read_series_csv(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) throw IoError("missing " + file.string());
  const auto rows = csv::read_file(file);
  require(!rows.empty() && rows[0].size() == 2, file.string() + ": expected a two-column CSV with a header");
  std::vector<double> values;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    require(rows[r].size() == 2, file.string() + ": line " + std::to_string(r) + " must have 2 fields");
    const auto& text = rows[r][1];
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    require(ec == std::errc() && ptr == text.data() + text.size(), file.string() + ": cannot parse '" + text + "'");
    values.push_back(v);
  }
  return values;
}

}  // namespace polysketch::eval
