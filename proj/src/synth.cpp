#include "saber/synth.hpp"

#include <cmath>
#include <numbers>

namespace saber {

std::string_view to_string(ShapeType t) {
  switch (t) {
    case ShapeType::Circle:
      return "circle";
    case ShapeType::Square:
      return "square";
    case ShapeType::Triangle:
      return "triangle";
  }
  return "?";
}

namespace {

constexpr PaletteColor hsv_color(std::string_view name, double hue) {
  // full saturation and value, mapped to [-1, 1]
  const double h = hue / 60.0;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - static_cast<int>(h);
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = 1, g = f, b = 0; break;
    case 1: r = 1 - f, g = 1, b = 0; break;
    case 2: r = 0, g = 1, b = f; break;
    case 3: r = 0, g = 1 - f, b = 1; break;
    case 4: r = f, g = 0, b = 1; break;
    default: r = 1, g = 0, b = 1 - f; break;
  }
  return {name, hue, static_cast<float>(2 * r - 1), static_cast<float>(2 * g - 1), static_cast<float>(2 * b - 1)};
}

constexpr std::array<PaletteColor, 8> kShapePalette = {
    hsv_color("red", 0),    hsv_color("orange", 30), hsv_color("yellow", 60),  hsv_color("green", 120),
    hsv_color("cyan", 180), hsv_color("blue", 240),  hsv_color("purple", 270), hsv_color("magenta", 300)};

constexpr std::array<PaletteColor, 3> kBackgrounds = {
    PaletteColor{"white", -1, 1, 1, 1}, PaletteColor{"gray", -1, 0, 0, 0}, PaletteColor{"black", -1, -1, -1, -1}};

bool inside(const MovingShape& s, double x, double y) {
  const double dx = x - s.position.x();
  const double dy = y - s.position.y();
  const double r = s.radius;
  switch (s.type) {
    case ShapeType::Circle:
      return dx * dx + dy * dy <= r * r;
    case ShapeType::Square:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case ShapeType::Triangle: {
      // upright equilateral triangle inscribed in the radius-r circle
      const double top = -r;
      const double base = 0.5 * r;
      if (dy < top || dy > base) return false;
      const double half_width = (dy - top) / (base - top) * r * std::sqrt(3.0) / 2.0;
      return std::abs(dx) <= half_width;
    }
  }
  return false;
}

std::string direction_word(const Eigen::Vector2d& v) {
  if (v.norm() < 1e-9) return "in place";
  if (std::abs(v.x()) >= std::abs(v.y())) return v.x() > 0 ? "right" : "left";
  return v.y() > 0 ? "down" : "up";
}

}  // namespace

const std::array<PaletteColor, 8>& shape_palette() { return kShapePalette; }
const std::array<PaletteColor, 3>& background_palette() { return kBackgrounds; }

MovingShape step_shape(MovingShape s, int height, int width) {
  const double limits[2] = {static_cast<double>(width), static_cast<double>(height)};
  for (int axis = 0; axis < 2; ++axis) {
    double p = s.position[axis] + s.velocity[axis];
    const double lo = s.radius;
    const double hi = limits[axis] - s.radius;
    if (s.velocity[axis] > 0 && p >= hi) {
      p = 2 * hi - p;
      s.velocity[axis] = -s.velocity[axis];
    } else if (s.velocity[axis] < 0 && p <= lo) {
      p = 2 * lo - p;
      s.velocity[axis] = -s.velocity[axis];
    }
    s.position[axis] = std::clamp(p, std::min(lo, hi), std::max(lo, hi));
  }
  return s;
}

double shape_coverage(const MovingShape& shape, int row, int col) {
  constexpr int kSub = 4;
  int hits = 0;
  for (int i = 0; i < kSub; ++i) {
    for (int j = 0; j < kSub; ++j) {
      hits += inside(shape, col + (j + 0.5) / kSub, row + (i + 0.5) / kSub);
    }
  }
  return static_cast<double>(hits) / (kSub * kSub);
}

Image render_scene(const SceneDescriptor& scene, int height, int width) {
  const PaletteColor& bg = kBackgrounds[scene.background];
  Image img = Image::filled(height, width, bg.r, bg.g, bg.b);
  // later shapes are drawn on top, so the subject goes last
  for (auto it = scene.shapes.rbegin(); it != scene.shapes.rend(); ++it) {
    const PaletteColor& c = kShapePalette[it->color];
    const float rgb[3] = {c.r, c.g, c.b};
    for (int r = 0; r < height; ++r) {
      for (int col = 0; col < width; ++col) {
        const float a = static_cast<float>(shape_coverage(*it, r, col));
        if (a == 0.0f) continue;
        for (int ch = 0; ch < 3; ++ch) img.at(r, col, ch) = (1 - a) * img.at(r, col, ch) + a * rgb[ch];
      }
    }
  }
  return img;
}

BinaryMask scene_mask(const SceneDescriptor& scene, int height, int width, bool all) {
  BinaryMask mask(height, width);
  const std::size_t count = all ? scene.shapes.size() : std::min<std::size_t>(1, scene.shapes.size());
  for (std::size_t s = 0; s < count; ++s) {
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        if (shape_coverage(scene.shapes[s], r, c) >= 0.5) mask.set(r, c, true);
      }
    }
  }
  return mask;
}

std::string caption_for(const SceneDescriptor& scene) {
  std::string out;
  for (std::size_t i = 0; i < scene.shapes.size(); ++i) {
    const MovingShape& s = scene.shapes[i];
    if (i > 0) out += " and ";
    out += "a ";
    out += kShapePalette[s.color].name;
    out += ' ';
    out += to_string(s.type);
    out += " moving " + direction_word(s.velocity);
  }
  out += " on a ";
  out += kBackgrounds[scene.background].name;
  out += " background";
  return out;
}

SceneDescriptor sample_scene(int height, int width, Rng& rng) {
  require(height >= 4 && width >= 4, "scene must be at least 4x4");
  SceneDescriptor scene;
  scene.background = uniform_int(rng, 0, static_cast<int>(kBackgrounds.size()) - 1);
  const int count = uniform_int(rng, 1, 2);
  const double extent = std::min(height, width);
  for (int i = 0; i < count; ++i) {
    MovingShape s;
    s.type = static_cast<ShapeType>(uniform_int(rng, 0, 2));
    do {
      s.color = uniform_int(rng, 0, static_cast<int>(kShapePalette.size()) - 1);
    } while (i > 0 && s.color == scene.shapes.front().color);
    s.radius = uniform(rng, 0.15, 0.25) * extent;
    s.position = {uniform(rng, s.radius, width - s.radius), uniform(rng, s.radius, height - s.radius)};
    const double angle = uniform(rng, 0.0, 2 * std::numbers::pi);
    const double speed = uniform(rng, 0.03, 0.08) * extent;
    s.velocity = speed * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    scene.shapes.push_back(s);
  }
  return scene;
}

SyntheticSample render_sample(const SceneDescriptor& scene, int frames, int height, int width) {
  require(frames >= 1, "a video needs at least one frame");
  SyntheticSample out;
  out.scene = scene;
  out.caption = caption_for(scene);
  SceneDescriptor state = scene;
  for (int f = 0; f < frames; ++f) {
    if (f > 0) {
      for (MovingShape& s : state.shapes) s = step_shape(s, height, width);
    }
    out.video.push_back(render_scene(state, height, width));
  }
  return out;
}

std::vector<SyntheticSample> synth_dataset(int n, int frames, int height, int width, std::uint64_t seed) {
  require(n >= 0, "sample count must be non-negative");
  std::vector<SyntheticSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(render_sample(sample_scene(height, width, rng), frames, height, width));
  }
  return out;
}

}  // namespace saber
