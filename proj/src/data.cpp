#include "polysketch/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "json.hpp"

#include "polysketch/csv.hpp"
#include "polysketch/error.hpp"
#include "polysketch/io.hpp"
#include "polysketch/rng.hpp"

namespace polysketch::data {

namespace fs = std::filesystem;
using nlohmann::json;

EmbeddingSet::EmbeddingSet(std::size_t d, std::vector<float> data, std::vector<std::uint32_t> labels,
                           std::vector<std::string> label_names)
    : d_(d), data_(std::move(data)), labels_(std::move(labels)), label_names_(std::move(label_names)) {
  require(data_.size() == labels_.size() * d_,
          "embedding payload has " + std::to_string(data_.size()) + " values, expected n*d = " +
              std::to_string(labels_.size()) + "*" + std::to_string(d_));
  for (std::size_t i = 0; i < data_.size(); ++i)
    require(std::isfinite(data_[i]), "non-finite embedding value at row " + std::to_string(i / std::max<std::size_t>(d_, 1)));
  for (std::size_t i = 0; i < labels_.size(); ++i)
    require(labels_[i] < label_names_.size(), "label " + std::to_string(labels_[i]) + " at row " +
                                                  std::to_string(i) + " is out of range for " +
                                                  std::to_string(label_names_.size()) + " classes");
}

EmbeddingSet EmbeddingSet::select(std::span<const std::size_t> rows) const {
  std::vector<float> data;
  std::vector<std::uint32_t> labels;
  data.reserve(rows.size() * d_);
  labels.reserve(rows.size());
  for (std::size_t r : rows) {
    require(r < size(), "row index out of range");
    auto src = row(r);
    data.insert(data.end(), src.begin(), src.end());
    labels.push_back(labels_[r]);
  }
  return {d_, std::move(data), std::move(labels), label_names_};
}

std::vector<std::size_t> EmbeddingSet::rows_of_class(std::uint32_t c) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == c) rows.push_back(i);
  return rows;
}

std::vector<std::size_t> EmbeddingSet::class_counts() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (auto l : labels_) ++counts[l];
  return counts;
}

Matrix EmbeddingSet::to_matrix() const {
  std::vector<double> values(data_.begin(), data_.end());
  return {size(), d_, std::move(values)};
}

Matrix EmbeddingSet::to_matrix(std::span<const std::size_t> rows) const {
  Matrix m(rows.size(), d_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = row(rows[i]);
    std::copy(src.begin(), src.end(), m.row(i).begin());
  }
  return m;
}

void SplitSpec::validate() const {
  require(train_frac > 0 && val_frac > 0 && test_frac > 0, "split fractions must all be positive");
  require(std::abs(train_frac + val_frac + test_frac - 1.0) <= 1e-12, "split fractions must sum to 1");
}

// Storage ------------------------------------------------------------------

EmbeddingSet load_embedding_set(const fs::path& dir) {
  const auto meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw IoError("missing " + meta_path.string());
  json meta;
  try {
    meta = json::parse(io::read_text(meta_path));
  } catch (const json::exception& e) {
    throw ValidationError(meta_path.string() + ": " + e.what());
  }
  std::size_t n = 0, d = 0;
  std::vector<std::string> names;
  try {
    require(meta.at("version").get<int>() == kFormatVersion, "unsupported meta.json version");
    n = meta.at("n").get<std::size_t>();
    d = meta.at("d").get<std::size_t>();
    names = meta.at("label_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError(meta_path.string() + ": " + e.what());
  }
  for (const char* name : {"embeddings.f32", "labels.u32"})
    if (!fs::exists(dir / name)) throw IoError("missing " + (dir / name).string());

  auto values = io::read_f32(dir / "embeddings.f32");
  auto labels = io::read_u32(dir / "labels.u32");
  require(labels.size() == n, "size mismatch: meta.json n=" + std::to_string(n) + " but labels.u32 holds " +
                                  std::to_string(labels.size()) + " entries");
  require(values.size() == n * d, "size mismatch: meta.json n*d=" + std::to_string(n * d) +
                                      " but embeddings.f32 holds " + std::to_string(values.size()) + " values");
  return {d, std::move(values), std::move(labels), std::move(names)};
}

void save_embedding_set(const EmbeddingSet& set, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json meta = {{"version", kFormatVersion}, {"n", set.size()}, {"d", set.dim()}, {"label_names", set.label_names()}};
  io::write_text(dir / "meta.json", meta.dump() + "\n");
  io::write_f32(dir / "embeddings.f32", set.data());
  io::write_u32(dir / "labels.u32", set.labels());
}

namespace {

double parse_double(const std::string& text, const std::string& what) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ValidationError("cannot parse " + what + " '" + text + "'");
  return value;
}

std::uint32_t parse_u32(const std::string& text, const std::string& what) {
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ValidationError("cannot parse " + what + " '" + text + "'");
  return value;
}

}  // namespace

EmbeddingSet load_embedding_csv(const fs::path& file) {
  if (!fs::exists(file)) throw IoError("missing " + file.string());
  auto rows = csv::read_file(file);
  require(!rows.empty() && !rows[0].empty() && rows[0][0] == "label", file.string() + ": header must start with 'label'");
  const std::size_t d = rows[0].size() - 1;
  std::vector<std::string> names;
  std::map<std::string, std::uint32_t> ids;
  std::vector<float> data;
  std::vector<std::uint32_t> labels;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    require(row.size() == d + 1, file.string() + ": row " + std::to_string(r) + " has wrong column count");
    auto [it, inserted] = ids.try_emplace(row[0], static_cast<std::uint32_t>(names.size()));
    if (inserted) names.push_back(row[0]);
    labels.push_back(it->second);
    for (std::size_t c = 1; c <= d; ++c)
      data.push_back(static_cast<float>(parse_double(row[c], "feature value")));
  }
  return {d, std::move(data), std::move(labels), std::move(names)};
}

EmbeddingSet load_any(const fs::path& path) {
  if (fs::is_directory(path)) return load_embedding_set(path);
  if (path.extension() == ".csv") return load_embedding_csv(path);
  if (!fs::exists(path)) throw IoError("missing " + path.string());
  throw ValidationError(path.string() + ": expected an embedding-set directory or a .csv file");
}

std::vector<SampleMeta> load_sample_metas(const fs::path& csv_file) {
  if (!fs::exists(csv_file)) throw IoError("missing " + csv_file.string());
  auto rows = csv::read_file(csv_file);
  require(!rows.empty() && rows[0] == csv::Row{"sample_id", "label_id", "guess_rate"},
          csv_file.string() + ": header must be sample_id,label_id,guess_rate");
  std::vector<SampleMeta> metas;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    require(row.size() == 3, csv_file.string() + ": row " + std::to_string(r) + " must have 3 fields");
    SampleMeta m{row[0], parse_u32(row[1], "label_id"), parse_double(row[2], "guess_rate")};
    require(m.guess_rate >= 0.0 && m.guess_rate <= 1.0, "guess_rate outside [0,1] at row " + std::to_string(r));
    metas.push_back(std::move(m));
  }
  return metas;
}

void save_sample_metas(std::span<const SampleMeta> metas, const fs::path& csv_file) {
  std::ofstream out(csv_file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing " + csv_file.string());
  out << "sample_id,label_id,guess_rate\n";
  for (const auto& m : metas) {
    const std::string fields[] = {m.sample_id, std::to_string(m.label_id), csv::format_double(m.guess_rate)};
    csv::write_row(out, fields);
  }
  if (!out) throw IoError("write failed: " + csv_file.string());
}

// Pipeline steps -----------------------------------------------------------

std::vector<std::size_t> rows_passing_guess_rate(std::span<const SampleMeta> metas, double threshold) {
  require(threshold >= 0.0 && threshold <= 1.0, "threshold must lie in [0,1]");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < metas.size(); ++i)
    if (metas[i].guess_rate >= threshold) keep.push_back(i);
  return keep;
}

EmbeddingSet clean_by_guess_rate(const EmbeddingSet& set, std::span<const SampleMeta> metas, double threshold) {
  require(metas.size() == set.size(), "sample metadata has " + std::to_string(metas.size()) +
                                          " rows but the embedding set has " + std::to_string(set.size()));
  for (std::size_t i = 0; i < metas.size(); ++i)
    require(metas[i].label_id == set.label(i), "sample metadata label disagrees with labels.u32 at row " + std::to_string(i));
  const auto keep = rows_passing_guess_rate(metas, threshold);
  return set.select(keep);
}

EmbeddingSet rebalance_classes(const EmbeddingSet& set, std::uint64_t seed) {
  const auto counts = set.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    require(counts[c] > 0, "class " + set.label_names()[c] + " has no samples; cannot rebalance");
  const std::size_t target = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());

  std::vector<std::size_t> rows(set.size());
  std::iota(rows.begin(), rows.end(), 0);
  Rng rng(seed);
  for (std::uint32_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == target) continue;
    const auto members = set.rows_of_class(c);
    for (std::size_t k = counts[c]; k < target; ++k) rows.push_back(members[rng.uniform_index(members.size())]);
  }
  return set.select(rows);
}

namespace {

// Assigns each of `count` sequential positions to a part; part 0 takes the remainder.
void walk_quota(std::span<const double> fractions, std::span<const std::size_t> positions,
                std::span<std::size_t> part_of, std::size_t part_offset) {
  if (fractions.size() == 1) {
    for (auto p : positions) part_of[p] = part_offset;
    return;
  }
  const double held_share = std::accumulate(fractions.begin() + 1, fractions.end(), 0.0);
  constexpr double kSlack = 1e-9;
  std::vector<std::size_t> held;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto before = static_cast<std::size_t>(std::floor(static_cast<double>(i) * held_share + kSlack));
    const auto after = static_cast<std::size_t>(std::floor(static_cast<double>(i + 1) * held_share + kSlack));
    if (after > before)
      held.push_back(positions[i]);
    else
      part_of[positions[i]] = part_offset;
  }
  std::vector<double> rest(fractions.begin() + 1, fractions.end());
  for (auto& f : rest) f /= held_share;
  walk_quota(rest, held, part_of, part_offset + 1);
}

}  // namespace

std::vector<std::vector<std::size_t>> stratified_partition(std::span<const std::uint32_t> labels,
                                                           std::span<const double> fractions,
                                                           std::uint64_t seed) {
  require(!fractions.empty(), "at least one part is required");
  std::uint32_t num_classes = 0;
  for (auto l : labels) num_classes = std::max(num_classes, l + 1);

  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> sequence;
  sequence.reserve(labels.size());
  for (auto& rows : by_class) {
    rng.shuffle(std::span<std::size_t>(rows));
    sequence.insert(sequence.end(), rows.begin(), rows.end());
  }

  std::vector<std::size_t> positions(sequence.size());
  std::iota(positions.begin(), positions.end(), 0);
  std::vector<std::size_t> part_of(sequence.size(), 0);
  walk_quota(fractions, positions, part_of, 0);

  std::vector<std::vector<std::size_t>> parts(fractions.size());
  for (std::size_t p = 0; p < sequence.size(); ++p) parts[part_of[p]].push_back(sequence[p]);
  for (auto& part : parts) std::sort(part.begin(), part.end());
  return parts;
}

SplitResult split(const EmbeddingSet& set, const SplitSpec& spec) {
  spec.validate();
  require(set.size() >= 3, "split needs at least 3 rows");
  const double fractions[] = {spec.train_frac, spec.val_frac, spec.test_frac};
  auto parts = stratified_partition(set.labels(), fractions, spec.seed);
  const char* names[] = {"train", "val", "test"};
  for (std::size_t i = 0; i < 3; ++i)
    require(!parts[i].empty(), std::string("split leaves the ") + names[i] + " part empty");
  return {set.select(parts[0]), set.select(parts[1]), set.select(parts[2])};
}

ClassHistogram class_histogram(const EmbeddingSet& set, std::size_t bins) {
  require(bins >= 1, "histogram needs at least one bin");
  ClassHistogram hist;
  hist.counts = set.class_counts();
  if (hist.counts.empty()) return hist;
  const auto [min_it, max_it] = std::minmax_element(hist.counts.begin(), hist.counts.end());
  const double lo = static_cast<double>(*min_it);
  const double hi = static_cast<double>(*max_it);
  const double width = (hi - lo) / static_cast<double>(bins);
  hist.bins.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    hist.bins[b].lower = lo + width * static_cast<double>(b);
    hist.bins[b].upper = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (auto count : hist.counts) {
    std::size_t b = 0;
    if (hi > lo) b = static_cast<std::size_t>((static_cast<double>(count) - lo) / (hi - lo) * static_cast<double>(bins));
    ++hist.bins[std::min(b, bins - 1)].classes;
  }
  return hist;
}

}  // namespace polysketch::data
