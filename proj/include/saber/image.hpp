#pragma once

#include "saber/common.hpp"

#include <vector>

namespace saber {

/// Three-channel raster with values nominally in [-1, 1], stored row-major and channel-interleaved.
struct Image {
  int height = 0;
  int width = 0;
  Eigen::ArrayXf data;

  Image() = default;
  Image(int h, int w) : height(h), width(w), data(Eigen::ArrayXf::Zero(3 * h * w)) {}

  static Image filled(int h, int w, float r, float g, float b) {
    Image img(h, w);
    for (int i = 0; i < h * w; ++i) {
      img.data[3 * i] = r;
      img.data[3 * i + 1] = g;
      img.data[3 * i + 2] = b;
    }
    return img;
  }

  float& at(int row, int col, int ch) { return data[3 * (row * width + col) + ch]; }
  float at(int row, int col, int ch) const { return data[3 * (row * width + col) + ch]; }

  bool same_shape(const Image& other) const { return height == other.height && width == other.width; }
  bool operator==(const Image& other) const {
    return same_shape(other) && (data == other.data).all();
  }
};

using Video = std::vector<Image>;

}  // namespace saber
