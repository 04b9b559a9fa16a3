#include "oracles.hpp"
#include "saber/mask.hpp"

#include <doctest.h>

#include <cmath>

using namespace saber;

TEST_CASE("ratio mixture bucket frequencies") {
  const RatioMixture mix = RatioMixture::standard();
  Rng rng(1);
  int low = 0, mid = 0, high = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double r = sample_ratio(mix, rng);
    REQUIRE(r >= 0.0);
    REQUIRE(r <= 1.0);
    if (r < 0.1) ++low;
    else if (r < 0.5) ++mid;
    else ++high;
  }
  CHECK(std::abs(low / double(n) - 0.1) < 0.02);
  CHECK(std::abs(mid / double(n) - 0.8) < 0.02);
  CHECK(std::abs(high / double(n) - 0.1) < 0.02);
}

TEST_CASE("ratio mixture degenerate and disjoint buckets") {
  Rng rng(2);
  const RatioMixture fixed({{1.0, 0.3, 0.3}});
  for (int i = 0; i < 100; ++i) CHECK(sample_ratio(fixed, rng) == 0.3);

  const RatioMixture split({{0.5, 0.0, 0.2}, {0.5, 0.8, 1.0}});
  for (int i = 0; i < 2000; ++i) {
    const double r = sample_ratio(split, rng);
    CHECK_FALSE((r > 0.2 && r < 0.8));
  }
}

TEST_CASE("ratio mixture rejects invalid buckets") {
  CHECK_THROWS_AS(RatioMixture({{0.5, 0.0, 0.1}}), ContractViolation);
  CHECK_THROWS_AS(RatioMixture({{1.0, 0.4, 0.2}}), ContractViolation);
  CHECK_THROWS_AS(RatioMixture({{1.0, -0.1, 0.2}}), ContractViolation);
}

TEST_CASE("mask spec validation") {
  CHECK_THROWS_AS((MaskSpec{ShapeKind::Ellipse, 7, 8, 0.3, 0}.validate()), ContractViolation);
  CHECK_THROWS_AS((MaskSpec{ShapeKind::Ellipse, 8, 8, 1.2, 0}.validate()), ContractViolation);
  CHECK((MaskSpec{ShapeKind::Ellipse, 64, 64, 0.3, 0}.target_count()) == 1229);
}

TEST_CASE("radius-10 disc matches the pixel-center rule") {
  const BinaryMask m = raster_shape(ShapeKind::Ellipse, {32, 32}, 10.0, EllipseParams{1, 1, 0}, 64, 64);
  const int expected = oracle::disc_count(64, 64, 32, 32, 10.0);
  CHECK(expected == 317);
  CHECK(m.foreground_count() == expected);
  CHECK(m == oracle::disc_mask(64, 64, 32, 32, 10.0));
}

TEST_CASE("raster extremes") {
  Rng rng(3);
  for (ShapeKind kind : kAllShapeKinds) {
    const ShapeParams p = sample_shape_params(kind, rng);
    CHECK(raster_shape(kind, {20, 20}, 1e-9, p, 40, 40).foreground_count() <= 1);
    CHECK(raster_shape(kind, {20, 20}, 1e6, p, 40, 40).foreground_count() == 1600);
  }
  CHECK_THROWS_AS(raster_shape(ShapeKind::Ellipse, {20, 20}, 0.0, EllipseParams{}, 40, 40), ContractViolation);
}

TEST_CASE("degenerate shape parameters are unsatisfiable") {
  CHECK_THROWS_AS(ShapeRaster(ShapeKind::Ellipse, {10, 10}, EllipseParams{0, 0, 0}, 20, 20), UnsatisfiableShape);
  PolygonParams flat;
  flat.vertices = {{1e-14, 0}, {0, 1e-14}, {-1e-14, 0}};
  CHECK_THROWS_AS(ShapeRaster(ShapeKind::ConvexPolygon, {10, 10}, flat, 20, 20), UnsatisfiableShape);
}

TEST_CASE("raster area is monotone and connected for every kind") {
  Rng rng(4);
  for (ShapeKind kind : kAllShapeKinds) {
    for (int trial = 0; trial < 10; ++trial) {
      const ShapeParams p = sample_shape_params(kind, rng);
      const Pixel center{uniform_int(rng, 6, 41), uniform_int(rng, 6, 41)};
      int prev = 0;
      for (int i = 1; i <= 40; ++i) {
        const BinaryMask m = raster_shape(kind, center, 0.9 * i, p, 48, 48);
        CHECK(m.foreground_count() >= prev);
        prev = m.foreground_count();
        if (m.foreground_count() > 0) CHECK(oracle::components(m) == 1);
      }
    }
  }
}

TEST_CASE("bisection boundary targets") {
  const EllipseParams p{1, 0.6, 0.3};
  const ScaleFit empty = bisect_scale(ShapeKind::Ellipse, {32, 32}, p, 0, 64, 64);
  CHECK(empty.mask.foreground_count() == 0);
  const ScaleFit full = bisect_scale(ShapeKind::Ellipse, {32, 32}, p, 64 * 64, 64, 64);
  CHECK(full.mask.foreground_count() == 64 * 64);
}

TEST_CASE("bisection lands within the discretization gap") {
  const EllipseParams p{1, 1, 0};
  const int target = 1229;
  const ScaleFit fit = bisect_scale(ShapeKind::Ellipse, {32, 32}, p, target, 64, 64);
  // fine scan for the achievable areas that bracket the target
  int below = 0, above = 64 * 64;
  for (double s = 0.001; s < 50; s += 0.001) {
    const int a = oracle::disc_count(64, 64, 32, 32, s);
    if (a <= target) below = std::max(below, a);
    if (a >= target) above = std::min(above, a);
  }
  CHECK(fit.mask.foreground_count() >= below);
  CHECK(fit.mask.foreground_count() <= above);
  CHECK(std::min(target - below, above - target) == std::abs(fit.mask.foreground_count() - target));
}

TEST_CASE("adjust_area grows by boundary pixels") {
  const BinaryMask base = oracle::disc_mask(64, 64, 32, 32, 19.7);
  const int count = base.foreground_count();
  Rng rng(5);
  const BinaryMask grown = adjust_area(base, count + 4, rng);
  CHECK(grown.foreground_count() == count + 4);
  CHECK(oracle::components(grown) == 1);
  int added = 0;
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      if (base.at(r, c)) CHECK(grown.at(r, c));
      if (!base.at(r, c) && grown.at(r, c)) ++added;
    }
  }
  CHECK(added == 4);
}

TEST_CASE("adjust_area identity and size limit") {
  const BinaryMask base = oracle::disc_mask(32, 32, 16, 16, 6);
  Rng rng(6);
  CHECK(adjust_area(base, base.foreground_count(), rng) == base);
  CHECK_THROWS_AS(adjust_area(base, base.foreground_count() + 60, rng), ContractViolation);
}

TEST_CASE("shrinking a 3x3 blob removes a non-cut boundary pixel") {
  BinaryMask blob(10, 10);
  for (int r = 3; r < 6; ++r) {
    for (int c = 3; c < 6; ++c) blob.set(r, c, true);
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const BinaryMask out = adjust_area(blob, 8, rng);
    REQUIRE(out.foreground_count() == 8);
    CHECK(oracle::components(out) == 1);
    int removed_r = -1, removed_c = -1;
    for (int r = 0; r < 10; ++r) {
      for (int c = 0; c < 10; ++c) {
        if (blob.at(r, c) && !out.at(r, c)) removed_r = r, removed_c = c;
      }
    }
    REQUIRE(removed_r >= 0);
    CHECK(oracle::touches_background(blob, removed_r, removed_c));
    CHECK_FALSE((removed_r == 4 && removed_c == 4));
  }
}

TEST_CASE("shrinking never disconnects a thin shape") {
  // a dumbbell: two blocks joined by a one-pixel bridge
  BinaryMask m(12, 20);
  for (int r = 3; r < 9; ++r) {
    for (int c = 2; c < 7; ++c) m.set(r, c, true);
    for (int c = 13; c < 18; ++c) m.set(r, c, true);
  }
  for (int c = 7; c < 13; ++c) m.set(6, c, true);
  Rng rng(7);
  BinaryMask cur = m;
  while (cur.foreground_count() > 40) {
    cur = adjust_area(cur, cur.foreground_count() - 1, rng);
    REQUIRE(oracle::components(cur) == 1);
  }
}

TEST_CASE("simple-point test agrees with brute force on 3x3 neighborhoods") {
  // Removing a simple point preserves both foreground 8-components and background 4-components in the window.
  auto count4 = [](const std::array<int, 25>& bg) {
    std::array<int, 25> seen{};
    int n = 0;
    for (int s = 0; s < 25; ++s) {
      if (!bg[s] || seen[s]) continue;
      ++n;
      std::vector<int> stack{s};
      seen[s] = 1;
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int y = p / 5, x = p % 5;
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k) {
          if (ny[k] < 0 || nx[k] < 0 || ny[k] > 4 || nx[k] > 4) continue;
          const int q = ny[k] * 5 + nx[k];
          if (bg[q] && !seen[q]) seen[q] = 1, stack.push_back(q);
        }
      }
    }
    return n;
  };
  for (int code = 0; code < 256; ++code) {
    // 3x3 window embedded in a 5x5 frame whose outer ring is background
    BinaryMask m(5, 5);
    m.set(2, 2, true);
    const int ring[8][2] = {{1, 1}, {1, 2}, {1, 3}, {2, 3}, {3, 3}, {3, 2}, {3, 1}, {2, 1}};
    for (int k = 0; k < 8; ++k) {
      if (code >> k & 1) m.set(ring[k][0], ring[k][1], true);
    }
    BinaryMask removed = m;
    removed.set(2, 2, false);
    std::array<int, 25> bg_before{}, bg_after{};
    for (int i = 0; i < 25; ++i) {
      bg_before[i] = !m.at(i / 5, i % 5);
      bg_after[i] = !removed.at(i / 5, i % 5);
    }
    const bool fg_same = oracle::components(m) == oracle::components(removed) && removed.foreground_count() > 0;
    const bool bg_same = count4(bg_before) == count4(bg_after);
    CHECK_MESSAGE(is_simple_point(m, 2, 2) == (fg_same && bg_same), "configuration " << code);
  }
}

TEST_CASE("generate_mask is exact, connected and deterministic") {
  for (ShapeKind kind : kAllShapeKinds) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      Rng rng(seed);
      const MaskSpec spec{kind, 48, 40, sample_ratio(RatioMixture::standard(), rng), seed};
      const BinaryMask a = generate_mask(spec);
      CHECK(a.foreground_count() == spec.target_count());
      if (a.foreground_count() > 0) CHECK(oracle::components(a) == 1);
      CHECK(a == generate_mask(spec));
    }
  }
}

TEST_CASE("generate_mask at the ratio extremes") {
  CHECK(generate_mask({ShapeKind::ConcavePolygon, 16, 16, 0.0, 1}).foreground_count() == 0);
  CHECK(generate_mask({ShapeKind::FourierBlob, 16, 16, 1.0, 1}).foreground_count() == 256);
  CHECK(generate_mask({ShapeKind::ConvexPolygon, 16, 16, 1.0 / 256, 1}).foreground_count() == 1);
}

TEST_CASE("shape kind names round trip") {
  for (ShapeKind kind : kAllShapeKinds) CHECK(parse_shape_kind(to_string(kind)) == kind);
  CHECK_FALSE(parse_shape_kind("hexagon").has_value());
}
