#include "saber/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <vector>

namespace saber {

namespace {

struct PngImage {
  png_image info;
  PngImage() {
    std::memset(&info, 0, sizeof(info));
    info.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&info); }
};

std::vector<std::uint8_t> read_pixels(const std::filesystem::path& path, std::uint32_t format, int& height,
                                      int& width) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.info, path.c_str()))
    throw FormatError("cannot read PNG " + path.string() + ": " + png.info.message);
  png.info.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png.info));
  if (!png_image_finish_read(&png.info, nullptr, buffer.data(), 0, nullptr))
    throw FormatError("cannot decode PNG " + path.string() + ": " + png.info.message);
  height = static_cast<int>(png.info.height);
  width = static_cast<int>(png.info.width);
  return buffer;
}

void write_pixels(const std::filesystem::path& path, std::uint32_t format, int height, int width,
                  const std::vector<std::uint8_t>& buffer) {
  PngImage png;
  png.info.format = format;
  png.info.height = static_cast<png_uint_32>(height);
  png.info.width = static_cast<png_uint_32>(width);
  if (!png_image_write_to_file(&png.info, path.c_str(), 0, buffer.data(), 0, nullptr))
    throw FormatError("cannot write PNG " + path.string() + ": " + png.info.message);
}

}  // namespace

std::uint8_t to_byte(float v) {
  const float x = std::round((std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(x);
}

float from_byte(std::uint8_t b) { return static_cast<float>(b) / 127.5f - 1.0f; }

Image read_png(const std::filesystem::path& path) {
  int h = 0, w = 0;
  const auto pixels = read_pixels(path, PNG_FORMAT_RGB, h, w);
  Image img(h, w);
  for (std::size_t i = 0; i < pixels.size(); ++i) img.data[static_cast<Eigen::Index>(i)] = from_byte(pixels[i]);
  return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(image.data.size()));
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = to_byte(image.data[static_cast<Eigen::Index>(i)]);
  write_pixels(path, PNG_FORMAT_RGB, image.height, image.width, pixels);
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
  int h = 0, w = 0;
  const auto pixels = read_pixels(path, PNG_FORMAT_GRAY, h, w);
  BinaryMask mask(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (pixels[static_cast<std::size_t>(r) * w + c] > 127) mask.set(r, c, true);
    }
  }
  return mask;
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(mask.height()) * mask.width());
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) pixels[static_cast<std::size_t>(r) * mask.width() + c] = mask.at(r, c) ? 255 : 0;
  }
  write_pixels(path, PNG_FORMAT_GRAY, mask.height(), mask.width(), pixels);
}

}  // namespace saber
