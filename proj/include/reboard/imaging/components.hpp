#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "reboard/imaging/diff.hpp"

namespace reboard::imaging {

struct Component {
  Rect box;
  std::size_t area = 0;

  double fill_ratio() const noexcept {
    return box.area() > 0 ? static_cast<double>(area) / static_cast<double>(box.area()) : 0.0;
  }
};

enum class Connectivity { Four = 4, Eight = 8 };

/// Connected components of the set pixels of a mask, in raster order of their
/// first pixel.
inline std::vector<Component> connected_components(const Mask& mask,
                                                   Connectivity conn = Connectivity::Eight) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<Component> out;
  std::vector<std::uint8_t> seen(std::size_t(w) * h, 0);
  std::vector<int> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t start = std::size_t(y0) * w + x0;
      if (!mask(x0, y0) || seen[start]) continue;
      int minx = x0, maxx = x0, miny = y0, maxy = y0;
      std::size_t area = 0;
      seen[start] = 1;
      stack.assign(1, static_cast<int>(start));
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int x = p % w, y = p / w;
        ++area;
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (conn == Connectivity::Four && dx != 0 && dy != 0) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t q = std::size_t(ny) * w + nx;
            if (seen[q] || !mask(nx, ny)) continue;
            seen[q] = 1;
            stack.push_back(static_cast<int>(q));
          }
        }
      }
      out.push_back({Rect{minx, miny, maxx - minx + 1, maxy - miny + 1}, area});
    }
  }
  return out;
}

}  // namespace reboard::imaging
