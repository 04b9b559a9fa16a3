#pragma once

// Brute-force reference implementations used only by tests.

#include "saber/mask.hpp"

#include <queue>
#include <vector>

namespace oracle {

/// 8-connected foreground components by breadth-first flood fill.
inline int components(const saber::BinaryMask& m) {
  const int H = m.height(), W = m.width();
  std::vector<char> seen(static_cast<std::size_t>(H) * W, 0);
  int count = 0;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (!m.at(r, c) || seen[r * W + c]) continue;
      ++count;
      std::queue<std::pair<int, int>> q;
      q.push({r, c});
      seen[r * W + c] = 1;
      while (!q.empty()) {
        auto [y, x] = q.front();
        q.pop();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || nx < 0 || ny >= H || nx >= W || !m.at(ny, nx) || seen[ny * W + nx]) continue;
            seen[ny * W + nx] = 1;
            q.push({ny, nx});
          }
        }
      }
    }
  }
  return count;
}

/// Lattice points (pixel centers) within distance `radius` of the center pixel.
inline int disc_count(int height, int width, int cr, int cc, double radius) {
  int n = 0;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) n += (r - cr) * (r - cr) + (c - cc) * (c - cc) <= radius * radius;
  }
  return n;
}

inline saber::BinaryMask disc_mask(int height, int width, double cr, double cc, double radius) {
  saber::BinaryMask m(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= radius * radius) m.set(r, c, true);
    }
  }
  return m;
}

inline bool touches_background(const saber::BinaryMask& m, int r, int c) {
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int y = r + dy, x = c + dx;
      if (!m.contains(y, x) || !m.at(y, x)) return true;
    }
  }
  return false;
}

inline bool touches_foreground(const saber::BinaryMask& m, int r, int c) {
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int y = r + dy, x = c + dx;
      if ((dy || dx) && m.contains(y, x) && m.at(y, x)) return true;
    }
  }
  return false;
}

}  // namespace oracle
