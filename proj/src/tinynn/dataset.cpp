#include "polysketch/tinynn/dataset.hpp"

#include "json.hpp"
#include "polysketch/error.hpp"
#include "polysketch/io.hpp"

namespace polysketch::tinynn {

namespace fs = std::filesystem;
using nlohmann::json;

void ImageDataset::validate() const {
  require(channels >= 1 && height >= 1 && width >= 1, "image dataset: dims must be positive");
  require(pixels.size() == labels.size() * image_size(), "image dataset: pixel payload does not match n*C*H*W");
  for (auto l : labels) require(l < label_names.size(), "image dataset: label out of range");
}

ImageDataset ImageDataset::subset(std::span<const std::size_t> rows) const {
  ImageDataset out{channels, height, width, {}, {}, label_names};
  const std::size_t stride = image_size();
  out.pixels.reserve(rows.size() * stride);
  for (auto r : rows) {
    require(r < size(), "image dataset: row out of range");
    out.pixels.insert(out.pixels.end(), pixels.begin() + static_cast<std::ptrdiff_t>(r * stride),
                      pixels.begin() + static_cast<std::ptrdiff_t>((r + 1) * stride));
    out.labels.push_back(labels[r]);
  }
  return out;
}

std::vector<std::uint32_t> ImageDataset::batch_labels(std::span<const std::size_t> rows) const {
  std::vector<std::uint32_t> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(labels[r]);
  return out;
}

ImageDataset load_image_dataset(const fs::path& dir) {
  const auto index = dir / "index.json";
  for (const auto& p : {index, dir / "images.u8", dir / "labels.u32"})
    if (!fs::exists(p)) throw IoError("missing " + p.string());
  ImageDataset set;
  std::size_t n = 0;
  try {
    const auto meta = json::parse(io::read_text(index));
    require(meta.at("version").get<int>() == 1, "unsupported index.json version");
    n = meta.at("n").get<std::size_t>();
    set.channels = meta.at("channels").get<std::size_t>();
    set.height = meta.at("height").get<std::size_t>();
    set.width = meta.at("width").get<std::size_t>();
    set.label_names = meta.at("label_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError(index.string() + ": " + e.what());
  }
  set.pixels = io::read_u8(dir / "images.u8");
  set.labels = io::read_u32(dir / "labels.u32");
  require(set.labels.size() == n, "size mismatch: index.json n does not match labels.u32");
  set.validate();
  return set;
}

void save_image_dataset(const ImageDataset& set, const fs::path& dir) {
  set.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json meta = {{"version", 1},         {"n", set.size()},    {"channels", set.channels},
               {"height", set.height}, {"width", set.width}, {"label_names", set.label_names}};
  io::write_text(dir / "index.json", meta.dump() + "\n");
  io::write_u8(dir / "images.u8", set.pixels);
  io::write_u32(dir / "labels.u32", set.labels);
}

}  // namespace polysketch::tinynn
