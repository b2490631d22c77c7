#pragma once

#include "pawfuse/image.hpp"
#include "pawfuse/rng.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace pawfuse {

struct FlipHorizontal {
  double probability = 0.5;
};
/// Angle drawn uniformly from [-max_degrees, max_degrees].
struct Rotate {
  double max_degrees = 15.0;
};
/// Additive delta drawn from [-max_delta, max_delta].
struct Brightness {
  double max_delta = 0.1;
};
/// Factor drawn from [max(0, 1 - max_factor), 1 + max_factor], applied about
/// the mean luma.
struct Contrast {
  double max_factor = 0.1;
};
/// Same factor range, applied about each pixel's luma.
struct Saturation {
  double max_factor = 0.1;
};
/// Zeroes one axis-aligned rectangle covering an area fraction drawn from
/// [min_area, max_area].
struct RandomErase {
  double min_area = 0.02;
  double max_area = 0.1;
};

using AugmentStep = std::variant<FlipHorizontal, Rotate, Brightness, Contrast, Saturation, RandomErase>;

struct AugmentationSpec {
  std::vector<AugmentStep> steps;
  std::uint64_t seed = 0;

  /// Erasing, rotation, brightness, flip, contrast, saturation.
  static AugmentationSpec standard(std::uint64_t seed = 0);
  void validate() const;
};

/// Applies every step in order. Shape is preserved and values stay in [0, 1].
ImageTensor augment(const ImageTensor& image, const AugmentationSpec& spec, Rng& rng);

ImageTensor flip_horizontal(const ImageTensor& image);
/// Rotation about the image center; exposed corners replicate the nearest edge.
ImageTensor rotate(const ImageTensor& image, double degrees);
ImageTensor adjust_brightness(const ImageTensor& image, double delta);
ImageTensor adjust_contrast(const ImageTensor& image, double factor);
ImageTensor adjust_saturation(const ImageTensor& image, double factor);
ImageTensor erase_rect(const ImageTensor& image, int top, int left, int height, int width);

}  // namespace pawfuse
