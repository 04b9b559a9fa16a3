#pragma once

#include "saber/image.hpp"
#include "saber/mask.hpp"

#include <filesystem>

namespace saber {

/// 8-bit RGB PNG; v in [-1, 1] maps to round((v + 1) * 127.5).
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

/// Grayscale PNG, foreground = 255. Reading treats any value above 127 as foreground.
BinaryMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);

std::uint8_t to_byte(float v);
float from_byte(std::uint8_t b);

}  // namespace saber
