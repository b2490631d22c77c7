#include "pawfuse/image.hpp"

#include "pawfuse/errors.hpp"

#include <fmt/format.h>
#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

namespace pawfuse {

ImageTensor::ImageTensor(int h, int w, double fill)
    : height(h), width(w), data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * kChannels, fill) {}

void validate_image(const ImageTensor& image) {
  if (image.height <= 0 || image.width <= 0) throw ContractError("image: non-positive dimensions");
  if (image.data.size() != image.pixel_count() * ImageTensor::kChannels) {
    throw ContractError("image: data length does not match dimensions");
  }
  for (double v : image.data) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("image: value outside [0, 1]");
  }
}

void clamp_unit(ImageTensor& image) {
  for (double& v : image.data) v = std::clamp(v, 0.0, 1.0);
}

Matrix to_grayscale(const ImageTensor& image) {
  Matrix g(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      g(y, x) = 0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) + 0.114 * image.at(y, x, 2);
    }
  }
  return g;
}

ImageTensor resize_bilinear(const ImageTensor& image, int height, int width) {
  if (height <= 0 || width <= 0) throw ContractError("resize: non-positive target size");
  if (height == image.height && width == image.width) return image;
  ImageTensor out(height, width);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < ImageTensor::kChannels; ++c) {
        const double top = image.at(y0, x0, c) * (1 - wx) + image.at(y0, x1, c) * wx;
        const double bottom = image.at(y1, x0, c) * (1 - wx) + image.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ImageTensor from_rgb8(int h, int w, const unsigned char* px) {
  ImageTensor img(h, w);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = px[i] / 255.0;
  return img;
}

ImageTensor decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw IoError(fmt::format("{}: {}", name, png.message));
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> px(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, px.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError(fmt::format("{}: {}", name, png.message));
  }
  return from_rgb8(static_cast<int>(png.height), static_cast<int>(png.width), px.data());
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

ImageTensor decode_jpeg(const std::vector<unsigned char>& bytes, const std::string& name) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  std::vector<unsigned char> px;
  int h = 0;
  int w = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError(fmt::format("{}: {}", name, err.message));
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  h = static_cast<int>(cinfo.output_height);
  w = static_cast<int>(cinfo.output_width);
  px.resize(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row = px.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_rgb8(h, w, px.data());
}

bool is_png(std::span<const unsigned char> b) {
  return b.size() >= 8 && b[0] == 0x89 && b[1] == 'P' && b[2] == 'N' && b[3] == 'G';
}
bool is_jpeg(std::span<const unsigned char> b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

std::pair<int, int> fixture_header(std::span<const unsigned char> bytes, std::size_t& offset) {
  const auto nl = std::find(bytes.begin(), bytes.end(), '\n');
  if (nl == bytes.end()) throw IoError("fixture image: missing header line");
  std::istringstream ss(std::string(bytes.begin(), nl));
  int h = 0;
  int w = 0;
  if (!(ss >> h >> w) || h <= 0 || w <= 0) throw IoError("fixture image: bad header");
  offset = static_cast<std::size_t>(nl - bytes.begin()) + 1;
  return {h, w};
}

}  // namespace

ImageTensor decode_fixture(std::span<const unsigned char> bytes) {
  std::size_t offset = 0;
  auto [h, w] = fixture_header(bytes, offset);
  const std::size_t need = static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3;
  if (bytes.size() - offset != need) {
    throw IoError(fmt::format("fixture image: expected {} pixel bytes, found {}", need,
                              bytes.size() - offset));
  }
  return from_rgb8(h, w, bytes.data() + offset);
}

ImageTensor load_image(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (is_png(bytes)) return decode_png(bytes, path.string());
  if (is_jpeg(bytes)) return decode_jpeg(bytes, path.string());
  try {
    return decode_fixture(bytes);
  } catch (const IoError& e) {
    throw IoError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<unsigned char> encode_fixture(const ImageTensor& image) {
  const std::string header = fmt::format("{} {}\n", image.height, image.width);
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + image.data.size());
  for (double v : image.data) {
    out.push_back(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

void save_fixture(const std::filesystem::path& path, const ImageTensor& image) {
  const auto bytes = encode_fixture(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::optional<std::pair<int, int>> probe_size(const std::filesystem::path& path) {
  try {
    const auto bytes = read_bytes(path);
    if (is_png(bytes) && bytes.size() >= 24) {
      auto be32 = [&](std::size_t at) {
        return static_cast<int>((bytes[at] << 24) | (bytes[at + 1] << 16) | (bytes[at + 2] << 8) |
                                bytes[at + 3]);
      };
      return std::pair{be32(20), be32(16)};
    }
    if (is_jpeg(bytes)) {
      const ImageTensor img = decode_jpeg(bytes, path.string());
      return std::pair{img.height, img.width};
    }
    std::size_t offset = 0;
    return fixture_header(bytes, offset);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::optional<std::filesystem::path> find_image(const std::filesystem::path& dir,
                                                const std::string& id) {
  for (const char* ext : {".jpg", ".jpeg", ".png", ".rgb"}) {
    auto p = dir / (id + ext);
    if (std::filesystem::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

}  // namespace pawfuse
