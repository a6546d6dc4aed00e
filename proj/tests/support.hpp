#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polysketch/data.hpp"
#include "polysketch/matrix.hpp"
#include "polysketch/rng.hpp"
#include "polysketch/tinynn/dataset.hpp"

namespace polysketch::fixtures {

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& file);

data::EmbeddingSet random_set(Rng& rng, std::size_t n, std::size_t d, std::size_t classes);
Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0);

struct Blobs {
  Matrix points;
  Matrix means;
  std::vector<std::uint32_t> labels;
};

// `per_blob` points around each mean with isotropic noise sigma.
Blobs gaussian_blobs(Rng& rng, const Matrix& means, std::size_t per_blob, double sigma);

/// Classes each made of three planted sub-clusters. Class centres sit on
/// scaled axes 0..C-1 (pairwise distance between_class); sub-cluster offsets
/// sit on three further axes (pairwise distance within_class).
struct PlantedClasses {
  data::EmbeddingSet set;
  Matrix sub_means;  // (C * 3) x d, class-major
};
PlantedClasses planted_classes(Rng& rng, std::size_t classes, std::size_t per_class, double within_class,
                               double between_class, double sigma);

/// 16x16 RGB images of four coloured shapes (red square, green disc, blue
/// horizontal bar, yellow cross) with jittered position and light noise.
tinynn::ImageDataset coloured_shapes(Rng& rng, std::size_t per_class, std::size_t size = 16);

}  // namespace polysketch::fixtures
