#pragma once

#include "saber/common.hpp"

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace saber {

enum class ShapeKind { Ellipse, FourierBlob, ConvexPolygon, ConcavePolygon };

inline constexpr std::array<ShapeKind, 4> kAllShapeKinds = {
    ShapeKind::Ellipse, ShapeKind::FourierBlob, ShapeKind::ConvexPolygon, ShapeKind::ConcavePolygon};

std::string_view to_string(ShapeKind kind);
/// Accepts "ellipse", "fourier", "convex", "concave".
std::optional<ShapeKind> parse_shape_kind(std::string_view name);

using MaskArray = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// H x W raster of {0,1} that keeps its foreground pixel count in sync with the data.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width);
  /// Throws ContractViolation if any element is outside {0,1}.
  explicit BinaryMask(MaskArray data);

  static BinaryMask full(int height, int width);

  int height() const { return static_cast<int>(data_.rows()); }
  int width() const { return static_cast<int>(data_.cols()); }
  int size() const { return height() * width(); }
  int foreground_count() const { return count_; }
  bool empty() const { return count_ == 0; }

  bool at(int row, int col) const { return data_(row, col) != 0; }
  bool contains(int row, int col) const {
    return row >= 0 && col >= 0 && row < height() && col < width();
  }
  void set(int row, int col, bool value);

  const MaskArray& data() const { return data_; }

  bool operator==(const BinaryMask& other) const {
    return data_.rows() == other.data_.rows() && data_.cols() == other.data_.cols() &&
           (data_ == other.data_).all();
  }

 private:
  MaskArray data_;
  int count_ = 0;
};

struct Pixel {
  int row = 0;
  int col = 0;
};

/// Number of 8-connected foreground components.
int count_components(const BinaryMask& mask);

/// Yokoi connectivity test: removing (row, col) keeps the 8-connected foreground topology.
bool is_simple_point(const BinaryMask& mask, int row, int col);

struct MaskSpec {
  ShapeKind kind = ShapeKind::Ellipse;
  int height = 64;
  int width = 64;
  double target_ratio = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
  int target_count() const;
};

struct RatioBucket {
  double probability;
  double lo;
  double hi;
};

/// Mixture of uniform intervals for the foreground area ratio.
class RatioMixture {
 public:
  /// Throws ContractViolation unless probabilities sum to 1 and every bucket is inside [0,1].
  explicit RatioMixture(std::vector<RatioBucket> buckets);

  /// 10% on [0, 0.1], 80% on [0.1, 0.5], 10% on [0.5, 1.0].
  static RatioMixture standard();

  const std::vector<RatioBucket>& buckets() const { return buckets_; }

 private:
  std::vector<RatioBucket> buckets_;
};

double sample_ratio(const RatioMixture& mixture, Rng& rng);

// Per-kind shape parameters. Every shape is star-shaped about its center, and
// a pixel is foreground iff its center lies inside the continuous shape.

struct EllipseParams {
  double major = 1.0;
  double minor = 1.0;
  double orientation = 0.0;  // radians
};

/// rho(phi) = 1 + sum_n amplitudes[n-1] * cos(n*phi + phases[n-1]).
struct FourierParams {
  std::vector<double> amplitudes;
  std::vector<double> phases;
};

/// Closed polygon around the origin with vertices sorted by angle.
struct PolygonParams {
  std::vector<Eigen::Vector2d> vertices;  // (x, y) = (col, row) offsets on the unit disc
};

using ShapeParams = std::variant<EllipseParams, FourierParams, PolygonParams>;

ShapeParams sample_shape_params(ShapeKind kind, Rng& rng);
ShapeKind sample_shape_kind(std::span<const ShapeKind> allowed, Rng& rng);

/// Precomputes, per pixel, the smallest scale at which its center enters the
/// shape; rasterizing at a scale keeps the 8-connected component of the center.
/// Area is non-decreasing in scale by construction.
class ShapeRaster {
 public:
  ShapeRaster(ShapeKind kind, Pixel center, const ShapeParams& params, int height, int width);

  BinaryMask rasterize(double scale) const;
  int area(double scale) const;
  /// Smallest scale at which the whole frame is foreground.
  double saturation_scale() const { return saturation_; }

 private:
  template <typename Visit>
  int flood(double scale, Visit&& visit) const;

  int height_;
  int width_;
  Pixel center_;
  Eigen::ArrayXd threshold_;  // indexed row * width + col
  double saturation_ = 0.0;
};

/// Pre-adjustment rasterization; scale must be > 0 and the center inside the frame.
BinaryMask raster_shape(ShapeKind kind, Pixel center, double scale, const ShapeParams& params,
                        int height, int width);

struct ScaleFit {
  double scale = 0.0;
  BinaryMask mask;
};

ScaleFit bisect_scale(ShapeKind kind, Pixel center, const ShapeParams& params, int target_count,
                      int height, int width);
ScaleFit bisect_scale(const ShapeRaster& raster, int target_count);

/// Grows or shrinks the foreground one boundary pixel at a time until it holds
/// exactly target_count pixels, never breaking 8-connectivity.
BinaryMask adjust_area(const BinaryMask& mask, int target_count, Rng& rng);

/// Deterministic in spec (its seed drives every draw).
BinaryMask generate_mask(const MaskSpec& spec);

}  // namespace saber
