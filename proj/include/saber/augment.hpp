#pragma once

#include "saber/image.hpp"
#include "saber/mask.hpp"

#include <Eigen/Geometry>

namespace saber {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

struct AugmentConfig {
  Interval rotation_deg{-10.0, 10.0};
  Interval scale{0.8, 2.0};
  Interval shear_deg{-10.0, 10.0};
  double hflip_prob = 0.5;
  /// Bounds |translation| to this fraction of the frame; the feasible set is intersected with it.
  double max_translate_fraction = 1.0;
  int max_resample_attempts = 64;
  /// False reproduces the no-augmentation ablation: the affine is forced to identity.
  bool enabled = true;

  static AugmentConfig disabled();
  /// Every range collapsed onto the identity transform.
  static AugmentConfig identity();
  void validate() const;
};

struct AffineParams {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double shear_deg = 0.0;
  Eigen::Vector2d translate = Eigen::Vector2d::Zero();  // (dx, dy) in pixels
  bool hflip = false;

  bool is_identity() const {
    return rotation_deg == 0.0 && scale == 1.0 && shear_deg == 0.0 && translate.isZero(0.0) && !hflip;
  }
};

/// Mean (x, y) = (col, row) of the foreground pixel centers.
Eigen::Vector2d foreground_centroid(const BinaryMask& mask);

/// Source-to-destination map: horizontal frame flip, then shear, rotation and
/// scale about the (flipped) foreground centroid, then translation.
Eigen::Affine2d affine_transform(const AffineParams& params, const Eigen::Vector2d& centroid,
                                 int width);

/// Corners of the foreground pixel squares that span its convex hull.
std::vector<Eigen::Vector2d> foreground_hull_points(const BinaryMask& mask);

/// Draws rotation, shear and flip uniformly, then a scale uniformly from the part of
/// the configured range that still lets the transformed foreground fit, then a
/// translation uniformly from the feasible set. Falls back to identity.
AffineParams sample_affine(const AugmentConfig& config, const BinaryMask& mask, Rng& rng);

struct WarpedPair {
  Image image;
  BinaryMask mask;
};

/// Bilinear for the image (out-of-frame reads are 0), nearest-neighbor for the mask.
WarpedPair apply_affine(const Image& image, const BinaryMask& mask, const AffineParams& params);

/// image * mask with the mask broadcast over channels.
Image apply_mask(const Image& image, const BinaryMask& mask);

struct MaskedReference {
  Image image;          // augmented frame
  BinaryMask mask;      // augmented mask
  Image masked_frame;   // image * mask
  AffineParams params;
};

MaskedReference make_masked_reference(const Image& frame, const BinaryMask& mask,
                                      const AugmentConfig& config, Rng& rng);

/// True iff no foreground pixel lies on the one-pixel frame border.
bool strictly_inside(const BinaryMask& mask);

}  // namespace saber
