#pragma once

#include "saber/image.hpp"
#include "saber/mask.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Geometry>

namespace saber {

enum class ShapeType { Circle, Square, Triangle };
std::string_view to_string(ShapeType t);

struct PaletteColor {
  std::string_view name;
  double hue_deg;  // -1 for achromatic
  float r, g, b;   // in [-1, 1]
};

/// Eight saturated hues for shapes.
const std::array<PaletteColor, 8>& shape_palette();
/// White, gray and black backgrounds.
const std::array<PaletteColor, 3>& background_palette();

struct MovingShape {
  ShapeType type = ShapeType::Circle;
  int color = 0;     // index into shape_palette()
  double radius = 1;
  Eigen::Vector2d position{0, 0};  // (x, y) in pixel units, pixel (r, c) spans [c, c+1] x [r, r+1]
  Eigen::Vector2d velocity{0, 0};  // pixels per frame
};

struct SceneDescriptor {
  std::vector<MovingShape> shapes;  // the first one is the caption's subject
  int background = 0;               // index into background_palette()
};

struct SyntheticSample {
  Video video;
  std::string caption;
  SceneDescriptor scene;  // state at frame 0
};

/// Advance one frame; a wall hit reflects the position and negates that velocity component.
MovingShape step_shape(MovingShape shape, int height, int width);

/// Fraction of the pixel covered by the shape (4x4 supersampling).
double shape_coverage(const MovingShape& shape, int row, int col);

Image render_scene(const SceneDescriptor& scene, int height, int width);
/// Pixels at least half covered by the subject shape (or by any shape when `all` is set).
BinaryMask scene_mask(const SceneDescriptor& scene, int height, int width, bool all = false);

/// "a {color} {shape} moving {direction} on a {bg} background"
std::string caption_for(const SceneDescriptor& scene);

SceneDescriptor sample_scene(int height, int width, Rng& rng);
SyntheticSample render_sample(const SceneDescriptor& scene, int frames, int height, int width);
std::vector<SyntheticSample> synth_dataset(int n, int frames, int height, int width, std::uint64_t seed);

}  // namespace saber
