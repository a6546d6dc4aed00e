#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace polysketch::fixtures {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::uint64_t counter = 0;
  Rng rng(static_cast<std::uint64_t>(std::hash<std::string>{}(tag)) ^ ++counter);
  path_ = fs::temp_directory_path() / ("polysketch-" + tag + "-" + std::to_string(rng.next_u64() % 1000000007));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

data::EmbeddingSet random_set(Rng& rng, std::size_t n, std::size_t d, std::size_t classes) {
  std::vector<float> values(n * d);
  for (auto& v : values) v = static_cast<float>(rng.normal(0.0, 3.0));
  std::vector<std::uint32_t> labels(n);
  for (auto& l : labels) l = static_cast<std::uint32_t>(rng.uniform_index(classes));
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("class_" + std::to_string(c));
  return {d, std::move(values), std::move(labels), std::move(names)};
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = rng.normal(0.0, scale);
  return m;
}

Blobs gaussian_blobs(Rng& rng, const Matrix& means, std::size_t per_blob, double sigma) {
  Blobs b{Matrix(means.rows() * per_blob, means.cols()), means, {}};
  std::size_t r = 0;
  for (std::size_t k = 0; k < means.rows(); ++k)
    for (std::size_t i = 0; i < per_blob; ++i, ++r) {
      for (std::size_t c = 0; c < means.cols(); ++c) b.points(r, c) = means(k, c) + rng.normal(0.0, sigma);
      b.labels.push_back(static_cast<std::uint32_t>(k));
    }
  return b;
}

PlantedClasses planted_classes(Rng& rng, std::size_t classes, std::size_t per_class, double within_class,
                               double between_class, double sigma) {
  const std::size_t d = classes + 3;
  const double class_scale = between_class / std::sqrt(2.0);
  const double sub_scale = within_class / std::sqrt(2.0);
  PlantedClasses out{{}, Matrix(classes * 3, d)};
  std::vector<float> values;
  std::vector<std::uint32_t> labels;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) {
    names.push_back("class_" + std::to_string(c));
    for (std::size_t s = 0; s < 3; ++s) {
      out.sub_means(c * 3 + s, c) = class_scale;
      out.sub_means(c * 3 + s, classes + s) = sub_scale;
    }
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::size_t s = i % 3;
      for (std::size_t k = 0; k < d; ++k)
        values.push_back(static_cast<float>(out.sub_means(c * 3 + s, k) + rng.normal(0.0, sigma)));
      labels.push_back(static_cast<std::uint32_t>(c));
    }
  }
  out.set = data::EmbeddingSet(d, std::move(values), std::move(labels), std::move(names));
  return out;
}

tinynn::ImageDataset coloured_shapes(Rng& rng, std::size_t per_class, std::size_t size) {
  tinynn::ImageDataset set;
  set.channels = 3;
  set.height = size;
  set.width = size;
  set.label_names = {"red_square", "green_disc", "blue_bar", "yellow_cross"};
  const int colours[4][3] = {{230, 30, 30}, {30, 200, 40}, {40, 60, 230}, {230, 220, 30}};
  const auto n = static_cast<int>(size);
  for (std::uint32_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const int cx = n / 2 + static_cast<int>(rng.uniform_index(5)) - 2;
      const int cy = n / 2 + static_cast<int>(rng.uniform_index(5)) - 2;
      const int r = n / 4;
      std::vector<std::uint8_t> image(set.image_size(), 0);
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const int dx = x - cx, dy = y - cy;
          bool inside = false;
          switch (c) {
            case 0: inside = std::abs(dx) <= r && std::abs(dy) <= r; break;
            case 1: inside = dx * dx + dy * dy <= r * r; break;
            case 2: inside = std::abs(dx) <= r + 2 && std::abs(dy) <= 1; break;
            case 3: inside = (std::abs(dx) <= 1 && std::abs(dy) <= r) || (std::abs(dy) <= 1 && std::abs(dx) <= r); break;
          }
          for (int ch = 0; ch < 3; ++ch) {
            const int noise = static_cast<int>(rng.uniform_index(21)) - 10;
            const int base = inside ? colours[c][ch] : 20;
            image[(static_cast<std::size_t>(ch) * size + static_cast<std::size_t>(y)) * size + static_cast<std::size_t>(x)] =
                static_cast<std::uint8_t>(std::clamp(base + noise, 0, 255));
          }
        }
      set.pixels.insert(set.pixels.end(), image.begin(), image.end());
      set.labels.push_back(c);
    }
  }
  return set;
}

}  // namespace polysketch::fixtures
