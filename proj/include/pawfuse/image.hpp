#pragma once

#include "pawfuse/tensor.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pawfuse {

/// RGB image, row-major HWC, values in [0, 1].
struct ImageTensor {
  static constexpr int kChannels = 3;

  int height = 0;
  int width = 0;
  std::vector<double> data;

  ImageTensor() = default;
  ImageTensor(int h, int w, double fill = 0.0);

  double& at(int y, int x, int c) { return data[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data[index(y, x, c)]; }
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
               kChannels +
           static_cast<std::size_t>(c);
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }

  bool operator==(const ImageTensor&) const = default;
};

/// Throws ContractError unless dimensions are positive and values in [0, 1].
void validate_image(const ImageTensor& image);

void clamp_unit(ImageTensor& image);

/// BT.601 luma (0.299 R + 0.587 G + 0.114 B), as an H x W matrix.
Matrix to_grayscale(const ImageTensor& image);

/// Bilinear resampling with pixel-center alignment and edge clamping.
ImageTensor resize_bilinear(const ImageTensor& image, int height, int width);

/// Decodes PNG or JPEG (detected by magic bytes), or the fixture format:
/// an ASCII header line `H W` followed by H*W*3 raw bytes.
ImageTensor load_image(const std::filesystem::path& path);
ImageTensor decode_fixture(std::span<const unsigned char> bytes);

/// Writes the fixture format; values are quantized to 8 bits.
void save_fixture(const std::filesystem::path& path, const ImageTensor& image);
std::vector<unsigned char> encode_fixture(const ImageTensor& image);

/// Header-only probe returning (height, width) without decoding pixels where
/// the format allows it.
std::optional<std::pair<int, int>> probe_size(const std::filesystem::path& path);

/// Looks for `<id>.jpg`, `.jpeg`, `.png`, `.rgb` inside `dir`.
std::optional<std::filesystem::path> find_image(const std::filesystem::path& dir,
                                                const std::string& id);

}  // namespace pawfuse
