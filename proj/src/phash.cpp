#include "pawfuse/phash.hpp"

#include "pawfuse/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pawfuse {

std::string_view algorithm_name(HashAlgorithm a) {
  return a == HashAlgorithm::average ? "average" : "difference";
}

Matrix area_resize(const Matrix& gray, int height, int width) {
  if (height <= 0 || width <= 0 || gray.size() == 0) throw ContractError("area_resize: empty size");
  const double sy = static_cast<double>(gray.rows()) / height;
  const double sx = static_cast<double>(gray.cols()) / width;
  Matrix out(height, width);
  for (int oy = 0; oy < height; ++oy) {
    const double y0 = oy * sy;
    const double y1 = y0 + sy;
    for (int ox = 0; ox < width; ++ox) {
      const double x0 = ox * sx;
      const double x1 = x0 + sx;
      double acc = 0.0;
      double weight = 0.0;
      for (auto y = static_cast<Eigen::Index>(std::floor(y0)); y < std::min<double>(y1, gray.rows()); ++y) {
        const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        if (wy <= 0) continue;
        for (auto x = static_cast<Eigen::Index>(std::floor(x0)); x < std::min<double>(x1, gray.cols()); ++x) {
          const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          if (wx <= 0) continue;
          acc += wy * wx * gray(y, x);
          weight += wy * wx;
        }
      }
      out(oy, ox) = acc / weight;
    }
  }
  return out;
}

PerceptualHash perceptual_hash(const ImageTensor& image, HashAlgorithm algorithm) {
  validate_image(image);
  const Matrix gray = to_grayscale(image);
  std::uint64_t bits = 0;
  if (algorithm == HashAlgorithm::average) {
    const Matrix small = area_resize(gray, 8, 8);
    const double mean = small.mean();
    for (Eigen::Index i = 0; i < 64; ++i) {
      bits = (bits << 1) | (small.data()[i] > mean ? 1u : 0u);
    }
  } else {
    const Matrix small = area_resize(gray, 8, 9);
    for (Eigen::Index y = 0; y < 8; ++y) {
      for (Eigen::Index x = 0; x < 8; ++x) {
        bits = (bits << 1) | (small(y, x + 1) > small(y, x) ? 1u : 0u);
      }
    }
  }
  return {bits, algorithm};
}

}  // namespace pawfuse
