#include "saber/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace saber {

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Ellipse: return "ellipse";
    case ShapeKind::FourierBlob: return "fourier";
    case ShapeKind::ConvexPolygon: return "convex";
    case ShapeKind::ConcavePolygon: return "concave";
  }
  return "unknown";
}

std::optional<ShapeKind> parse_shape_kind(std::string_view name) {
  for (ShapeKind kind : kAllShapeKinds) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// BinaryMask

BinaryMask::BinaryMask(int height, int width) {
  require(height > 0 && width > 0, "mask dimensions must be positive");
  data_ = MaskArray::Zero(height, width);
}

BinaryMask::BinaryMask(MaskArray data) : data_(std::move(data)) {
  require((data_ <= 1).all(), "mask values must be 0 or 1");
  count_ = static_cast<int>(data_.cast<int>().sum());
}

BinaryMask BinaryMask::full(int height, int width) {
  require(height > 0 && width > 0, "mask dimensions must be positive");
  return BinaryMask(MaskArray::Ones(height, width));
}

void BinaryMask::set(int row, int col, bool value) {
  std::uint8_t& cell = data_(row, col);
  count_ += static_cast<int>(value) - static_cast<int>(cell);
  cell = value ? 1 : 0;
}

int count_components(const BinaryMask& mask) {
  const int h = mask.height();
  const int w = mask.width();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(h) * w, 0);
  std::vector<int> stack;
  int components = 0;
  for (int start = 0; start < h * w; ++start) {
    if (seen[start] || !mask.at(start / w, start % w)) continue;
    ++components;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      const int r = idx / w;
      const int c = idx % w;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int nr = r + dr;
          const int nc = c + dc;
          if (!mask.contains(nr, nc) || !mask.at(nr, nc)) continue;
          const int nidx = nr * w + nc;
          if (!seen[nidx]) {
            seen[nidx] = 1;
            stack.push_back(nidx);
          }
        }
      }
    }
  }
  return components;
}

bool is_simple_point(const BinaryMask& mask, int row, int col) {
  // Neighbors in counter-clockwise order starting east.
  static constexpr int kDr[8] = {0, -1, -1, -1, 0, 1, 1, 1};
  static constexpr int kDc[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  int bg[8];
  for (int k = 0; k < 8; ++k) {
    const int r = row + kDr[k];
    const int c = col + kDc[k];
    bg[k] = (mask.contains(r, c) && mask.at(r, c)) ? 0 : 1;
  }
  int connectivity = 0;
  for (int k = 0; k < 8; k += 2) {
    connectivity += bg[k] - bg[k] * bg[(k + 1) % 8] * bg[(k + 2) % 8];
  }
  return connectivity == 1;
}

// ---------------------------------------------------------------------------
// Ratios

void MaskSpec::validate() const {
  require(height >= 8 && width >= 8, "mask dimensions must be at least 8x8");
  require(std::isfinite(target_ratio) && target_ratio >= 0.0 && target_ratio <= 1.0,
          "target ratio must lie in [0, 1]");
}

int MaskSpec::target_count() const {
  return static_cast<int>(std::lround(target_ratio * height * width));
}

RatioMixture::RatioMixture(std::vector<RatioBucket> buckets) : buckets_(std::move(buckets)) {
  require(!buckets_.empty(), "ratio mixture needs at least one bucket");
  double total = 0.0;
  for (const RatioBucket& b : buckets_) {
    require(b.probability >= 0.0, "bucket probability must be non-negative");
    require(0.0 <= b.lo && b.lo <= b.hi && b.hi <= 1.0, "bucket must satisfy 0 <= lo <= hi <= 1");
    total += b.probability;
  }
  require(std::abs(total - 1.0) <= 1e-9, "bucket probabilities must sum to 1");
}

RatioMixture RatioMixture::standard() {
  return RatioMixture({{0.1, 0.0, 0.1}, {0.8, 0.1, 0.5}, {0.1, 0.5, 1.0}});
}

double sample_ratio(const RatioMixture& mixture, Rng& rng) {
  const auto& buckets = mixture.buckets();
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0.0;
  const RatioBucket* chosen = &buckets.back();
  for (const RatioBucket& b : buckets) {
    acc += b.probability;
    if (u < acc) {
      chosen = &b;
      break;
    }
  }
  return uniform(rng, chosen->lo, chosen->hi);
}

// ---------------------------------------------------------------------------
// Shape parameters

namespace {

constexpr double kPi = std::numbers::pi;

double angle_of(const Eigen::Vector2d& v) { return std::atan2(v.y(), v.x()); }

void sort_by_angle(std::vector<Eigen::Vector2d>& pts) {
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return angle_of(a) < angle_of(b);
  });
}

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
}

// Andrew's monotone chain, counter-clockwise in (x, y).
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (pts.size() < 3) return pts;
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Smallest support distance of the polygon edges from the origin; positive
// iff the origin is strictly inside and the polygon is star-shaped about it.
double min_edge_offset(const std::vector<Eigen::Vector2d>& verts) {
  const std::size_t n = verts.size();
  if (n < 3) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& a = verts[i];
    const Eigen::Vector2d& b = verts[(i + 1) % n];
    double gap = angle_of(b) - angle_of(a);
    if (gap <= 0) gap += 2 * kPi;
    if (gap >= kPi) return 0.0;
    const Eigen::Vector2d edge = b - a;
    const double len = edge.norm();
    if (len <= 0) return 0.0;
    // Vertices sorted by increasing angle: the outward normal is (e.y, -e.x).
    const Eigen::Vector2d normal(edge.y() / len, -edge.x() / len);
    best = std::min(best, normal.dot(a));
  }
  return best;
}

PolygonParams sample_convex(Rng& rng) {
  const int k = uniform_int(rng, 3, 8);
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<Eigen::Vector2d> pts;
    for (int i = 0; i < k; ++i) {
      const double theta = uniform(rng, 0.0, 2 * kPi);
      const double radius = std::sqrt(uniform(rng, 0.16, 1.0));
      pts.emplace_back(radius * std::cos(theta), radius * std::sin(theta));
    }
    auto hull = convex_hull(pts);
    sort_by_angle(hull);
    if (hull.size() >= 3 && min_edge_offset(hull) > 0.15) return {hull};
  }
  PolygonParams regular;
  const double phase = uniform(rng, 0.0, 2 * kPi);
  for (int i = 0; i < k; ++i) {
    const double theta = phase + 2 * kPi * i / k;
    regular.vertices.emplace_back(std::cos(theta), std::sin(theta));
  }
  sort_by_angle(regular.vertices);
  return regular;
}

PolygonParams sample_concave(Rng& rng) {
  const int k = uniform_int(rng, 5, 10);
  const double spacing = 2 * kPi / k;
  const double phase = uniform(rng, 0.0, 2 * kPi);
  PolygonParams poly;
  for (int i = 0; i < k; ++i) {
    const double theta = phase + spacing * i + uniform(rng, -0.3, 0.3) * spacing;
    const double radius = uniform(rng, 0.3, 1.0);
    poly.vertices.emplace_back(radius * std::cos(theta), radius * std::sin(theta));
  }
  sort_by_angle(poly.vertices);
  return poly;
}

FourierParams sample_fourier(Rng& rng) {
  const int n = uniform_int(rng, 2, 6);
  FourierParams fp;
  double total = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double amp = uniform(rng, -0.4, 0.4) / std::sqrt(static_cast<double>(i));
    fp.amplitudes.push_back(amp);
    fp.phases.push_back(uniform(rng, 0.0, 2 * kPi));
    total += std::abs(amp);
  }
  // Keep rho >= 0.2 everywhere.
  if (total > 0.8) {
    for (double& a : fp.amplitudes) a *= 0.8 / total;
  }
  return fp;
}

}  // namespace

ShapeParams sample_shape_params(ShapeKind kind, Rng& rng) {
  switch (kind) {
    case ShapeKind::Ellipse:
      return EllipseParams{1.0, uniform(rng, 0.3, 1.0), uniform(rng, 0.0, kPi)};
    case ShapeKind::FourierBlob:
      return sample_fourier(rng);
    case ShapeKind::ConvexPolygon:
      return sample_convex(rng);
    case ShapeKind::ConcavePolygon:
      return sample_concave(rng);
  }
  throw ContractViolation("unknown shape kind");
}

ShapeKind sample_shape_kind(std::span<const ShapeKind> allowed, Rng& rng) {
  require(!allowed.empty(), "at least one shape kind must be allowed");
  return allowed[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(allowed.size()) - 1))];
}

// ---------------------------------------------------------------------------
// Rasterization

namespace {

struct ThresholdFn {
  const ShapeParams& params;

  double operator()(double dx, double dy) const {
    if (dx == 0.0 && dy == 0.0) return 0.0;
    return std::visit([&](const auto& p) { return eval(p, dx, dy); }, params);
  }

  static double eval(const EllipseParams& p, double dx, double dy) {
    const double c = std::cos(p.orientation);
    const double s = std::sin(p.orientation);
    const double u = (dx * c + dy * s) / p.major;
    const double v = (-dx * s + dy * c) / p.minor;
    return std::sqrt(u * u + v * v);
  }

  static double eval(const FourierParams& p, double dx, double dy) {
    const double phi = std::atan2(dy, dx);
    double rho = 1.0;
    for (std::size_t n = 0; n < p.amplitudes.size(); ++n) {
      rho += p.amplitudes[n] * std::cos(static_cast<double>(n + 1) * phi + p.phases[n]);
    }
    return std::hypot(dx, dy) / rho;
  }

  static double eval(const PolygonParams& p, double dx, double dy) {
    const auto& v = p.vertices;
    const std::size_t n = v.size();
    const double phi = std::atan2(dy, dx);
    std::size_t hi = 0;
    while (hi < n && angle_of(v[hi]) <= phi) ++hi;
    const std::size_t i = (hi == 0) ? n - 1 : hi - 1;
    const Eigen::Vector2d& a = v[i];
    const Eigen::Vector2d& b = v[(i + 1) % n];
    const Eigen::Vector2d normal(b.y() - a.y(), a.x() - b.x());
    return normal.dot(Eigen::Vector2d(dx, dy)) / normal.dot(a);
  }
};

void validate_params(const ShapeParams& params) {
  if (const auto* e = std::get_if<EllipseParams>(&params)) {
    if (!(e->major > 1e-9 && e->minor > 1e-9)) throw UnsatisfiableShape("ellipse axes collapse to zero");
  } else if (const auto* f = std::get_if<FourierParams>(&params)) {
    if (f->amplitudes.size() != f->phases.size()) {
      throw UnsatisfiableShape("fourier amplitudes and phases differ in length");
    }
    double total = 0.0;
    for (double a : f->amplitudes) total += std::abs(a);
    if (!(total < 1.0 - 1e-9)) throw UnsatisfiableShape("fourier radius is not strictly positive");
  } else if (const auto* p = std::get_if<PolygonParams>(&params)) {
    if (p->vertices.size() < 3 || !(min_edge_offset(p->vertices) > 1e-9)) {
      throw UnsatisfiableShape("polygon is degenerate or not star-shaped about its center");
    }
  }
}

}  // namespace

ShapeRaster::ShapeRaster(ShapeKind, Pixel center, const ShapeParams& params, int height, int width)
    : height_(height), width_(width), center_(center) {
  require(height > 0 && width > 0, "raster dimensions must be positive");
  require(center.row >= 0 && center.row < height && center.col >= 0 && center.col < width,
          "shape center must lie inside the frame");
  validate_params(params);
  ThresholdFn fn{params};
  threshold_.resize(static_cast<Eigen::Index>(height) * width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      threshold_[r * width + c] = fn(c - center.col, r - center.row);
    }
  }
  if (!threshold_.allFinite()) throw UnsatisfiableShape("shape threshold field is not finite");
  saturation_ = threshold_.maxCoeff();
}

template <typename Visit>
int ShapeRaster::flood(double scale, Visit&& visit) const {
  if (!(scale > 0.0)) return 0;
  const int w = width_;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(height_) * w, 0);
  std::vector<int> stack;
  const int start = center_.row * w + center_.col;
  seen[start] = 1;
  stack.push_back(start);
  int count = 0;
  while (!stack.empty()) {
    const int idx = stack.back();
    stack.pop_back();
    ++count;
    visit(idx);
    const int r = idx / w;
    const int c = idx % w;
    const int r0 = std::max(r - 1, 0), r1 = std::min(r + 1, height_ - 1);
    const int c0 = std::max(c - 1, 0), c1 = std::min(c + 1, w - 1);
    for (int nr = r0; nr <= r1; ++nr) {
      for (int nc = c0; nc <= c1; ++nc) {
        const int nidx = nr * w + nc;
        if (!seen[nidx] && threshold_[nidx] <= scale) {
          seen[nidx] = 1;
          stack.push_back(nidx);
        }
      }
    }
  }
  return count;
}

BinaryMask ShapeRaster::rasterize(double scale) const {
  BinaryMask mask(height_, width_);
  flood(scale, [&](int idx) { mask.set(idx / width_, idx % width_, true); });
  return mask;
}

int ShapeRaster::area(double scale) const {
  return flood(scale, [](int) {});
}

BinaryMask raster_shape(ShapeKind kind, Pixel center, double scale, const ShapeParams& params,
                        int height, int width) {
  require(std::isfinite(scale) && scale > 0.0, "scale must be positive");
  return ShapeRaster(kind, center, params, height, width).rasterize(scale);
}

ScaleFit bisect_scale(const ShapeRaster& raster, int target_count) {
  const BinaryMask probe = raster.rasterize(0.0);
  const int total = probe.size();
  require(target_count >= 0 && target_count <= total, "target count must lie in [0, H*W]");
  if (target_count == 0) return {0.0, probe};

  double lo = 0.0;
  double hi = raster.saturation_scale();
  int area_lo = 0;
  int area_hi = total;
  if (target_count == total) return {hi, raster.rasterize(hi)};

  for (int iter = 0; iter < 64; ++iter) {
    if (hi - lo < 1e-6 * hi) break;
    const double mid = 0.5 * (lo + hi);
    const int area = raster.area(mid);
    if (area < area_lo || area > area_hi) {
      throw MonotonicityViolation("raster area decreased while the scale increased");
    }
    if (area == target_count) return {mid, raster.rasterize(mid)};
    if (area < target_count) {
      lo = mid;
      area_lo = area;
    } else {
      hi = mid;
      area_hi = area;
    }
  }
  const bool take_lo = area_lo > 0 && (target_count - area_lo) <= (area_hi - target_count);
  const double scale = take_lo ? lo : hi;
  return {scale, raster.rasterize(scale)};
}

ScaleFit bisect_scale(ShapeKind kind, Pixel center, const ShapeParams& params, int target_count,
                      int height, int width) {
  return bisect_scale(ShapeRaster(kind, center, params, height, width), target_count);
}

// ---------------------------------------------------------------------------
// Exact-area adjustment

namespace {

bool touches(const BinaryMask& mask, int r, int c, bool value) {
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const int nr = r + dr;
      const int nc = c + dc;
      const bool inside = mask.contains(nr, nc);
      const bool v = inside && mask.at(nr, nc);
      if (v == value) return true;
    }
  }
  return false;
}

}  // namespace

BinaryMask adjust_area(const BinaryMask& mask, int target_count, Rng& rng) {
  const int total = mask.size();
  require(target_count >= 0 && target_count <= total, "target count must lie in [0, H*W]");
  require(std::abs(mask.foreground_count() - target_count) <= 0.05 * total,
          "area adjustment only closes small discretization gaps");

  BinaryMask out = mask;
  std::vector<int> candidates;
  const int w = out.width();
  while (out.foreground_count() < target_count) {
    candidates.clear();
    for (int r = 0; r < out.height(); ++r) {
      for (int c = 0; c < w; ++c) {
        if (!out.at(r, c) && touches(out, r, c, true)) candidates.push_back(r * w + c);
      }
    }
    if (candidates.empty()) throw AdjustmentFailure("no background pixel borders the foreground");
    const int pick = candidates[uniform_int(rng, 0, static_cast<int>(candidates.size()) - 1)];
    out.set(pick / w, pick % w, true);
  }
  while (out.foreground_count() > target_count) {
    candidates.clear();
    for (int r = 0; r < out.height(); ++r) {
      for (int c = 0; c < w; ++c) {
        if (!out.at(r, c)) continue;
        if (out.foreground_count() == 1 || (touches(out, r, c, false) && is_simple_point(out, r, c))) {
          candidates.push_back(r * w + c);
        }
      }
    }
    if (candidates.empty()) throw AdjustmentFailure("every boundary pixel is a cut point");
    const int pick = candidates[uniform_int(rng, 0, static_cast<int>(candidates.size()) - 1)];
    out.set(pick / w, pick % w, false);
  }
  return out;
}

BinaryMask generate_mask(const MaskSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int target = spec.target_count();
  if (target == 0) return BinaryMask(spec.height, spec.width);

  const int total = spec.height * spec.width;
  const int margin = static_cast<int>(0.1 * std::min(spec.height, spec.width));
  constexpr int kRetries = 8;
  for (int attempt = 0; attempt <= kRetries; ++attempt) {
    const Pixel center{uniform_int(rng, margin, spec.height - 1 - margin),
                       uniform_int(rng, margin, spec.width - 1 - margin)};
    const ShapeParams params = sample_shape_params(spec.kind, rng);
    try {
      const ScaleFit fit = bisect_scale(spec.kind, center, params, target, spec.height, spec.width);
      if (std::abs(fit.mask.foreground_count() - target) > 0.05 * total) continue;
      return adjust_area(fit.mask, target, rng);
    } catch (const AdjustmentFailure&) {
    } catch (const UnsatisfiableShape&) {
    }
  }
  throw GenerationFailure("mask generation failed after " + std::to_string(kRetries) + " retries");
}

}  // namespace saber
