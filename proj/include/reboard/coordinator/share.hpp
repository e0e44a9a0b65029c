#pragma once

#include <optional>

#include "reboard/coordinator/types.hpp"
#include "reboard/imaging/components.hpp"

namespace reboard::coordinator {

/// Inclusive rectangle of grid cells.
struct CellRect {
  int c0 = 0, r0 = 0, c1 = 0, r1 = 0;

  int cell_count() const noexcept { return (c1 - c0 + 1) * (r1 - r0 + 1); }
  friend bool operator==(const CellRect&, const CellRect&) = default;
};

/// Mask of cells whose changed fraction exceeds `tolerance`.
inline imaging::Mask changed_cells(const imaging::Grid& g, double tolerance) {
  imaging::Mask m(g.cols, g.rows);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) m.set(c, r, g(c, r) > tolerance);
  return m;
}

/// Bounding box of the largest 4-connected cluster of changed cells; ties go
/// to the cluster met first in raster order.
inline std::optional<CellRect> largest_cluster(const imaging::Grid& g, double tolerance) {
  const auto comps = imaging::connected_components(changed_cells(g, tolerance), imaging::Connectivity::Four);
  const imaging::Component* best = nullptr;
  for (const auto& c : comps)
    if (!best || c.area > best->area) best = &c;
  if (!best) return std::nullopt;
  return CellRect{best->box.x, best->box.y, best->box.right() - 1, best->box.bottom() - 1};
}

/// Pixel rectangle covering exactly the given cells of a `cols` x `rows` grid
/// laid over a `width` x `height` image. Uses the same pixel-to-cell mapping as
/// the grid computation, so every pixel of every cell is inside.
inline imaging::Rect cells_to_pixels(const CellRect& cr, int cols, int rows, int width, int height) {
  auto first_px = [](int cell, int cells, int px) {
    return static_cast<int>((static_cast<long long>(cell) * px + cells - 1) / cells);
  };
  const int x0 = first_px(cr.c0, cols, width), x1 = first_px(cr.c1 + 1, cols, width);
  const int y0 = first_px(cr.r0, rows, height), y1 = first_px(cr.r1 + 1, rows, height);
  return {x0, y0, x1 - x0, y1 - y0};
}

/// Default share crop of a record, or nullopt when no coarse cell changed.
inline std::optional<imaging::Rect> default_share_crop(const CaptureRecord& rec) {
  const auto cells = largest_cluster(rec.grids.coarse, rec.cell_tolerance);
  if (!cells) return std::nullopt;
  return cells_to_pixels(*cells, rec.grids.coarse.cols, rec.grids.coarse.rows, rec.width, rec.height);
}

}  // namespace reboard::coordinator
