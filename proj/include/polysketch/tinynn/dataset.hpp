#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "polysketch/tinynn/tensor.hpp"

namespace polysketch::tinynn {

/// Raw 8-bit images stored channel-major (N x C x H x W).
///
/// On disk: `index.json` {"version":1,"n","channels","height","width",
/// "label_names":[...]}, `images.u8` with n*C*H*W bytes, and `labels.u32`
/// with n little-endian labels.
struct ImageDataset {
  std::size_t channels = 3;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint32_t> labels;
  std::vector<std::string> label_names;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return channels * height * width; }

  void validate() const;
  ImageDataset subset(std::span<const std::size_t> rows) const;

  // Selected images scaled to [0, 1].
  template <typename T>
  Tensor4<T> batch(std::span<const std::size_t> rows) const {
    Tensor4<T> out(rows.size(), channels, height, width);
    const std::size_t stride = image_size();
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t p = 0; p < stride; ++p)
        out.values()[i * stride + p] = static_cast<T>(pixels[rows[i] * stride + p]) / T(255);
    return out;
  }
  std::vector<std::uint32_t> batch_labels(std::span<const std::size_t> rows) const;
};

ImageDataset load_image_dataset(const std::filesystem::path& dir);
void save_image_dataset(const ImageDataset& set, const std::filesystem::path& dir);

}  // namespace polysketch::tinynn
