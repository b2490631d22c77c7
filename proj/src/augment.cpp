#include "pawfuse/augment.hpp"

#include "pawfuse/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pawfuse {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double draw_factor(double max_factor, Rng& rng) {
  return rng.uniform(std::max(0.0, 1.0 - max_factor), 1.0 + max_factor);
}

ImageTensor random_erase(const ImageTensor& image, const RandomErase& step, Rng& rng) {
  const double total = static_cast<double>(image.pixel_count());
  const double area = rng.uniform(step.min_area, step.max_area) * total;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double log_ratio = rng.uniform(std::log(0.3), std::log(1.0 / 0.3));
    const double ratio = std::exp(log_ratio);
    const int h = static_cast<int>(std::lround(std::sqrt(area * ratio)));
    const int w = static_cast<int>(std::lround(std::sqrt(area / ratio)));
    if (h < 1 || w < 1 || h > image.height || w > image.width) continue;
    const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(image.height - h + 1)));
    const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(image.width - w + 1)));
    return erase_rect(image, top, left, h, w);
  }
  // Square fallback, clipped to the image.
  const int side = std::max(1, static_cast<int>(std::lround(std::sqrt(area))));
  const int h = std::min(side, image.height);
  const int w = std::min(side, image.width);
  const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(image.height - h + 1)));
  const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(image.width - w + 1)));
  return erase_rect(image, top, left, h, w);
}

}  // namespace

AugmentationSpec AugmentationSpec::standard(std::uint64_t seed) {
  return {{RandomErase{}, Rotate{}, Brightness{}, FlipHorizontal{}, Contrast{}, Saturation{}}, seed};
}

void AugmentationSpec::validate() const {
  for (const auto& step : steps) {
    std::visit(overloaded{
                   [](const FlipHorizontal& s) {
                     if (!(s.probability >= 0.0 && s.probability <= 1.0)) {
                       throw ContractError("augment: flip probability outside [0, 1]");
                     }
                   },
                   [](const Rotate& s) {
                     if (!(s.max_degrees >= 0.0)) throw ContractError("augment: negative rotation");
                   },
                   [](const Brightness& s) {
                     if (!(s.max_delta >= 0.0)) throw ContractError("augment: negative brightness delta");
                   },
                   [](const Contrast& s) {
                     if (!(s.max_factor >= 0.0)) throw ContractError("augment: negative contrast factor");
                   },
                   [](const Saturation& s) {
                     if (!(s.max_factor >= 0.0)) throw ContractError("augment: negative saturation factor");
                   },
                   [](const RandomErase& s) {
                     if (!(s.min_area >= 0.0 && s.min_area <= s.max_area && s.max_area <= 1.0)) {
                       throw ContractError("augment: erase area range must satisfy 0 <= min <= max <= 1");
                     }
                   },
               },
               step);
  }
}

ImageTensor augment(const ImageTensor& image, const AugmentationSpec& spec, Rng& rng) {
  ImageTensor out = image;
  for (const auto& step : spec.steps) {
    out = std::visit(
        overloaded{
            [&](const FlipHorizontal& s) { return rng.bernoulli(s.probability) ? flip_horizontal(out) : out; },
            [&](const Rotate& s) { return rotate(out, rng.uniform(-s.max_degrees, s.max_degrees)); },
            [&](const Brightness& s) { return adjust_brightness(out, rng.uniform(-s.max_delta, s.max_delta)); },
            [&](const Contrast& s) { return adjust_contrast(out, draw_factor(s.max_factor, rng)); },
            [&](const Saturation& s) { return adjust_saturation(out, draw_factor(s.max_factor, rng)); },
            [&](const RandomErase& s) { return random_erase(out, s, rng); },
        },
        step);
  }
  return out;
}

ImageTensor flip_horizontal(const ImageTensor& image) {
  ImageTensor out(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < ImageTensor::kChannels; ++c) {
        out.at(y, image.width - 1 - x, c) = image.at(y, x, c);
      }
    }
  }
  return out;
}

ImageTensor rotate(const ImageTensor& image, double degrees) {
  if (degrees == 0.0) return image;
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const double cy = (image.height - 1) / 2.0;
  const double cx = (image.width - 1) / 2.0;
  ImageTensor out(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      // Inverse map from output pixel to source position.
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = std::clamp(cx + cs * dx + sn * dy, 0.0, image.width - 1.0);
      const double sy = std::clamp(cy - sn * dx + cs * dy, 0.0, image.height - 1.0);
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const int y1 = std::min(y0 + 1, image.height - 1);
      const double wx = sx - x0;
      const double wy = sy - y0;
      for (int c = 0; c < ImageTensor::kChannels; ++c) {
        const double top = image.at(y0, x0, c) * (1 - wx) + image.at(y0, x1, c) * wx;
        const double bottom = image.at(y1, x0, c) * (1 - wx) + image.at(y1, x1, c) * wx;
        out.at(y, x, c) = std::clamp(top * (1 - wy) + bottom * wy, 0.0, 1.0);
      }
    }
  }
  return out;
}

ImageTensor adjust_brightness(const ImageTensor& image, double delta) {
  ImageTensor out = image;
  for (double& v : out.data) v += delta;
  clamp_unit(out);
  return out;
}

ImageTensor adjust_contrast(const ImageTensor& image, double factor) {
  const double m = to_grayscale(image).mean();
  ImageTensor out = image;
  for (double& v : out.data) v = m + factor * (v - m);
  clamp_unit(out);
  return out;
}

ImageTensor adjust_saturation(const ImageTensor& image, double factor) {
  ImageTensor out = image;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double g =
          0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) + 0.114 * image.at(y, x, 2);
      for (int c = 0; c < ImageTensor::kChannels; ++c) {
        out.at(y, x, c) = std::clamp(g + factor * (image.at(y, x, c) - g), 0.0, 1.0);
      }
    }
  }
  return out;
}

ImageTensor erase_rect(const ImageTensor& image, int top, int left, int height, int width) {
  ImageTensor out = image;
  const int y_end = std::min(image.height, top + height);
  const int x_end = std::min(image.width, left + width);
  for (int y = std::max(0, top); y < y_end; ++y) {
    for (int x = std::max(0, left); x < x_end; ++x) {
      for (int c = 0; c < ImageTensor::kChannels; ++c) out.at(y, x, c) = 0.0;
    }
  }
  return out;
}

}  // namespace pawfuse
