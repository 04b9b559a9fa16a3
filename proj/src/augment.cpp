#include "saber/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace saber {

AugmentConfig AugmentConfig::disabled() {
  AugmentConfig cfg;
  cfg.enabled = false;
  return cfg;
}

AugmentConfig AugmentConfig::identity() {
  AugmentConfig cfg;
  cfg.rotation_deg = {0.0, 0.0};
  cfg.scale = {1.0, 1.0};
  cfg.shear_deg = {0.0, 0.0};
  cfg.hflip_prob = 0.0;
  cfg.max_translate_fraction = 0.0;
  return cfg;
}

void AugmentConfig::validate() const {
  require(rotation_deg.lo <= rotation_deg.hi, "rotation range is empty");
  require(scale.lo <= scale.hi && scale.lo > 0.0, "scale range must be non-empty and positive");
  require(shear_deg.lo <= shear_deg.hi && std::abs(shear_deg.lo) < 89.0 && std::abs(shear_deg.hi) < 89.0,
          "shear range must be non-empty and within (-89, 89) degrees");
  require(hflip_prob >= 0.0 && hflip_prob <= 1.0, "flip probability must lie in [0, 1]");
  require(max_translate_fraction >= 0.0, "translation fraction must be non-negative");
  require(max_resample_attempts >= 1, "at least one sampling attempt is required");
}

Eigen::Vector2d foreground_centroid(const BinaryMask& mask) {
  require(!mask.empty(), "centroid of an empty mask is undefined");
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (mask.at(r, c)) sum += Eigen::Vector2d(c, r);
    }
  }
  return sum / mask.foreground_count();
}

Eigen::Affine2d affine_transform(const AffineParams& params, const Eigen::Vector2d& centroid,
                                 int width) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  Eigen::Affine2d flip = Eigen::Affine2d::Identity();
  if (params.hflip) {
    flip.linear() << -1.0, 0.0, 0.0, 1.0;
    flip.translation() << width - 1.0, 0.0;
  }
  const Eigen::Vector2d pivot = flip * centroid;

  Eigen::Matrix2d shear;
  shear << 1.0, std::tan(params.shear_deg * kDeg), 0.0, 1.0;
  const Eigen::Matrix2d linear =
      params.scale * Eigen::Rotation2Dd(params.rotation_deg * kDeg).toRotationMatrix() * shear;

  Eigen::Affine2d about = Eigen::Affine2d::Identity();
  about.linear() = linear;
  about.translation() = pivot - linear * pivot;
  return Eigen::Translation2d(params.translate) * about * flip;
}

std::vector<Eigen::Vector2d> foreground_hull_points(const BinaryMask& mask) {
  std::vector<Eigen::Vector2d> pts;
  for (int r = 0; r < mask.height(); ++r) {
    int first = -1;
    int last = -1;
    for (int c = 0; c < mask.width(); ++c) {
      if (mask.at(r, c)) {
        if (first < 0) first = c;
        last = c;
      }
    }
    if (first < 0) continue;
    pts.emplace_back(first - 0.5, r - 0.5);
    pts.emplace_back(first - 0.5, r + 0.5);
    pts.emplace_back(last + 0.5, r - 0.5);
    pts.emplace_back(last + 0.5, r + 0.5);
  }
  return pts;
}

namespace {

struct Bounds {
  Eigen::Vector2d lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Eigen::Vector2d hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
};

Bounds transformed_bounds(const std::vector<Eigen::Vector2d>& pts, const Eigen::Affine2d& map) {
  Bounds b;
  for (const auto& p : pts) {
    const Eigen::Vector2d q = map * p;
    b.lo = b.lo.cwiseMin(q);
    b.hi = b.hi.cwiseMax(q);
  }
  return b;
}

}  // namespace

AffineParams sample_affine(const AugmentConfig& config, const BinaryMask& mask, Rng& rng) {
  config.validate();
  require(!mask.empty(), "affine sampling needs a non-empty foreground");
  if (!config.enabled) return {};

  const int w = mask.width();
  const int h = mask.height();
  const auto pts = foreground_hull_points(mask);
  const Eigen::Vector2d centroid = foreground_centroid(mask);
  // Foreground must land on pixel indices 1 .. size-2.
  const Eigen::Vector2d room(w - 3.0, h - 3.0);
  const Eigen::Vector2d shift_cap(config.max_translate_fraction * w, config.max_translate_fraction * h);

  for (int attempt = 0; attempt < config.max_resample_attempts; ++attempt) {
    AffineParams params;
    params.rotation_deg = uniform(rng, config.rotation_deg.lo, config.rotation_deg.hi);
    params.shear_deg = uniform(rng, config.shear_deg.lo, config.shear_deg.hi);
    params.hflip = uniform(rng, 0.0, 1.0) < config.hflip_prob;

    const Bounds unit = transformed_bounds(pts, affine_transform(params, centroid, w));
    const Eigen::Vector2d extent = unit.hi - unit.lo;
    const double fit_scale = std::min(room.x() / extent.x(), room.y() / extent.y());
    const double scale_hi = std::min(config.scale.hi, fit_scale);
    if (scale_hi < config.scale.lo) continue;
    params.scale = uniform(rng, config.scale.lo, scale_hi);

    const Bounds placed = transformed_bounds(pts, affine_transform(params, centroid, w));
    const Eigen::Vector2d t_lo = (Eigen::Vector2d(1.0, 1.0) - placed.lo).cwiseMax(-shift_cap);
    const Eigen::Vector2d t_hi = (Eigen::Vector2d(w - 2.0, h - 2.0) - placed.hi).cwiseMin(shift_cap);
    if ((t_lo.array() > t_hi.array()).any()) continue;
    params.translate = Eigen::Vector2d(uniform(rng, t_lo.x(), t_hi.x()), uniform(rng, t_lo.y(), t_hi.y()));
    return params;
  }
  return {};
}

WarpedPair apply_affine(const Image& image, const BinaryMask& mask, const AffineParams& params) {
  require(image.height == mask.height() && image.width == mask.width(),
          "image and mask dimensions differ");
  const int h = image.height;
  const int w = image.width;
  if (params.is_identity()) return {image, mask};

  const Eigen::Vector2d centroid =
      mask.empty() ? Eigen::Vector2d((w - 1) / 2.0, (h - 1) / 2.0) : foreground_centroid(mask);
  const Eigen::Affine2d inverse = affine_transform(params, centroid, w).inverse(Eigen::Affine);

  WarpedPair out{Image(h, w), BinaryMask(h, w)};
  auto fetch = [&](int r, int c, int ch) -> float {
    return (r >= 0 && r < h && c >= 0 && c < w) ? image.at(r, c, ch) : 0.0f;
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Eigen::Vector2d src = inverse * Eigen::Vector2d(c, r);
      const int nc = static_cast<int>(std::floor(src.x() + 0.5));
      const int nr = static_cast<int>(std::floor(src.y() + 0.5));
      if (mask.contains(nr, nc) && mask.at(nr, nc)) out.mask.set(r, c, true);

      const double x0 = std::floor(src.x());
      const double y0 = std::floor(src.y());
      const float fx = static_cast<float>(src.x() - x0);
      const float fy = static_cast<float>(src.y() - y0);
      const int ix = static_cast<int>(x0);
      const int iy = static_cast<int>(y0);
      for (int ch = 0; ch < 3; ++ch) {
        const float top = (1.0f - fx) * fetch(iy, ix, ch) + fx * fetch(iy, ix + 1, ch);
        const float bottom = (1.0f - fx) * fetch(iy + 1, ix, ch) + fx * fetch(iy + 1, ix + 1, ch);
        out.image.at(r, c, ch) = (1.0f - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

Image apply_mask(const Image& image, const BinaryMask& mask) {
  require(image.height == mask.height() && image.width == mask.width(),
          "image and mask dimensions differ");
  Image out(image.height, image.width);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      if (!mask.at(r, c)) continue;
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = image.at(r, c, ch);
    }
  }
  return out;
}

MaskedReference make_masked_reference(const Image& frame, const BinaryMask& mask,
                                      const AugmentConfig& config, Rng& rng) {
  require((frame.data.abs() <= 1.0f).all(), "reference frame values must lie in [-1, 1]");
  const AffineParams params =
      (config.enabled && !mask.empty()) ? sample_affine(config, mask, rng) : AffineParams{};
  WarpedPair warped = apply_affine(frame, mask, params);
  Image masked = apply_mask(warped.image, warped.mask);
  return {std::move(warped.image), std::move(warped.mask), std::move(masked), params};
}

bool strictly_inside(const BinaryMask& mask) {
  const int h = mask.height();
  const int w = mask.width();
  for (int c = 0; c < w; ++c) {
    if (mask.at(0, c) || mask.at(h - 1, c)) return false;
  }
  for (int r = 0; r < h; ++r) {
    if (mask.at(r, 0) || mask.at(r, w - 1)) return false;
  }
  return true;
}

}  // namespace saber
