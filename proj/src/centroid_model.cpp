#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "polysketch/cluster.hpp"
#include "polysketch/csv.hpp"
#include "polysketch/error.hpp"
#include "polysketch/io.hpp"

namespace polysketch::cluster {

namespace fs = std::filesystem;
using nlohmann::json;

CentroidModel::CentroidModel(std::size_t d, std::vector<std::vector<float>> centroids_per_class,
                             std::vector<std::string> label_names)
    : d_(d), centroids_(std::move(centroids_per_class)), label_names_(std::move(label_names)) {
  require(d_ >= 1, "centroid dimension must be at least 1");
  require(centroids_.size() == label_names_.size(), "centroid model needs one centroid block per class");
  for (std::size_t c = 0; c < centroids_.size(); ++c) {
    const auto& block = centroids_[c];
    require(!block.empty() && block.size() % d_ == 0,
            "class " + label_names_[c] + " needs at least one centroid of dimension " + std::to_string(d_));
    require(std::all_of(block.begin(), block.end(), [](float v) { return std::isfinite(v); }),
            "class " + label_names_[c] + " has a non-finite centroid");
  }
}

std::size_t CentroidModel::total_centroids() const {
  std::size_t total = 0;
  for (std::size_t c = 0; c < num_classes(); ++c) total += centroids_in_class(c);
  return total;
}

CentroidModel fit_class_centroids(const data::EmbeddingSet& set, std::size_t k_per_class, KMeansConfig config) {
  config.k = k_per_class;
  config.validate();
  std::vector<std::vector<float>> blocks(set.num_classes());
  for (std::uint32_t c = 0; c < set.num_classes(); ++c) {
    const auto rows = set.rows_of_class(c);
    require(rows.size() >= k_per_class, "class " + set.label_names()[c] + " has " + std::to_string(rows.size()) +
                                            " rows, fewer than k_per_class = " + std::to_string(k_per_class));
    KMeansConfig per_class = config;
    per_class.seed = config.seed + static_cast<std::uint64_t>(c) * config.restarts;
    const auto fit = lloyd_fit(set.to_matrix(rows), per_class);
    const auto values = fit.centroids.values();
    blocks[c].assign(values.begin(), values.end());
  }
  return {set.dim(), std::move(blocks), set.label_names()};
}

void save_centroid_model(const CentroidModel& model, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json classes = json::array();
  std::vector<float> payload;
  for (std::size_t c = 0; c < model.num_classes(); ++c) {
    classes.push_back({{"label", model.label_names()[c]}, {"k", model.centroids_in_class(c)}});
    const auto block = model.class_centroids(c);
    payload.insert(payload.end(), block.begin(), block.end());
  }
  json meta = {{"version", 1}, {"d", model.dim()}, {"classes", classes}};
  io::write_text(dir / "model.json", meta.dump() + "\n");
  io::write_f32(dir / "centroids.f32", payload);
}

CentroidModel load_centroid_model(const fs::path& dir) {
  const auto meta_path = dir / "model.json";
  if (!fs::exists(meta_path)) throw IoError("missing " + meta_path.string());
  if (!fs::exists(dir / "centroids.f32")) throw IoError("missing " + (dir / "centroids.f32").string());
  std::size_t d = 0;
  std::vector<std::string> names;
  std::vector<std::size_t> ks;
  try {
    const auto meta = json::parse(io::read_text(meta_path));
    require(meta.at("version").get<int>() == 1, "unsupported model.json version");
    d = meta.at("d").get<std::size_t>();
    for (const auto& cls : meta.at("classes")) {
      names.push_back(cls.at("label").get<std::string>());
      ks.push_back(cls.at("k").get<std::size_t>());
    }
  } catch (const json::exception& e) {
    throw ValidationError(meta_path.string() + ": " + e.what());
  }
  const auto payload = io::read_f32(dir / "centroids.f32");
  std::size_t expected = 0;
  for (auto k : ks) expected += k * d;
  require(payload.size() == expected, "size mismatch: model.json describes " + std::to_string(expected) +
                                          " values but centroids.f32 holds " + std::to_string(payload.size()));
  std::vector<std::vector<float>> blocks;
  std::size_t offset = 0;
  for (auto k : ks) {
    blocks.emplace_back(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                        payload.begin() + static_cast<std::ptrdiff_t>(offset + k * d));
    offset += k * d;
  }
  return {d, std::move(blocks), std::move(names)};
}

}  // namespace polysketch::cluster
