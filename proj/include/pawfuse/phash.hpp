#pragma once

#include "pawfuse/image.hpp"

#include <bit>
#include <cstdint>
#include <string_view>

namespace pawfuse {

enum class HashAlgorithm { average, difference };

std::string_view algorithm_name(HashAlgorithm a);

struct PerceptualHash {
  std::uint64_t bits = 0;
  HashAlgorithm algorithm = HashAlgorithm::average;

  bool operator==(const PerceptualHash&) const = default;
};

inline int hamming_distance(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }
inline int hamming_distance(const PerceptualHash& a, const PerceptualHash& b) {
  return hamming_distance(a.bits, b.bits);
}

/// Box-filter (area-weighted) downsampling of a grayscale matrix.
Matrix area_resize(const Matrix& gray, int height, int width);

/// average: 8x8 luma, bit set where the cell exceeds the mean.
/// difference: 8 rows x 9 columns of luma, bit set where a cell is brighter
/// than its left neighbour.
/// Bits are packed MSB-first in row-major order.
PerceptualHash perceptual_hash(const ImageTensor& image, HashAlgorithm algorithm = HashAlgorithm::average);

}  // namespace pawfuse
