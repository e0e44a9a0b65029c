#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "reboard/imaging/diff.hpp"

namespace reboard::imaging {

inline constexpr int kCoarseRows = 10;
inline constexpr int kFineFactor = 10;

/// Columns of the coarse grid for a board of the given aspect ratio.
inline int coarse_columns(double aspect_ratio) {
  const int x = static_cast<int>(std::lround(aspect_ratio * kCoarseRows));
  if (x < 1) throw Error(ErrorCode::InvalidArgument, "aspect ratio too small for a region grid");
  return x;
}

/// Rectangular grid of per-cell changed-pixel fractions, row-major.
struct Grid {
  int cols = 0;
  int rows = 0;
  std::vector<double> fraction;

  Grid() = default;
  Grid(int c, int r) : cols(c), rows(r), fraction(std::size_t(c) * r, 0.0) {}

  double operator()(int c, int r) const noexcept { return fraction[std::size_t(r) * cols + c]; }
  double& operator()(int c, int r) noexcept { return fraction[std::size_t(r) * cols + c]; }

  /// Number of cells whose fraction exceeds `tolerance`.
  int count_above(double tolerance) const noexcept {
    int n = 0;
    for (double f : fraction) n += f > tolerance ? 1 : 0;
    return n;
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Coarse X-by-10 and fine 10X-by-100 change grids of a rectified board.
struct RegionGridSet {
  int columns = 0;  // X
  Grid coarse;
  Grid fine;

  friend bool operator==(const RegionGridSet&, const RegionGridSet&) = default;
};

/// Raw per-cell tallies; pixel (x, y) falls in cell (floor(x*cols/w), floor(y*rows/h)).
struct CellCounts {
  int cols = 0;
  int rows = 0;
  std::vector<std::uint32_t> changed;
  std::vector<std::uint32_t> total;
};

inline CellCounts cell_counts(const DiffMap& diff, int cols, int rows) {
  const int w = diff.width();
  const int h = diff.height();
  if (cols <= 0 || rows <= 0 || w < cols || h < rows) {
    throw Error(ErrorCode::DimensionMismatch, "diff map too small to tile with the requested grid");
  }
  CellCounts out{cols, rows, std::vector<std::uint32_t>(std::size_t(cols) * rows, 0),
                 std::vector<std::uint32_t>(std::size_t(cols) * rows, 0)};
  std::vector<int> col_of(w);
  for (int x = 0; x < w; ++x) col_of[x] = static_cast<int>(static_cast<long long>(x) * cols / w);
  for (int y = 0; y < h; ++y) {
    const int r = static_cast<int>(static_cast<long long>(y) * rows / h);
    const std::size_t base = std::size_t(r) * cols;
    for (int x = 0; x < w; ++x) {
      const std::size_t cell = base + col_of[x];
      ++out.total[cell];
      out.changed[cell] += diff.changed(x, y) ? 1 : 0;
    }
  }
  return out;
}

namespace detail {
inline Grid to_grid(const CellCounts& counts) {
  Grid g(counts.cols, counts.rows);
  for (std::size_t i = 0; i < g.fraction.size(); ++i) {
    g.fraction[i] = static_cast<double>(counts.changed[i]) / static_cast<double>(counts.total[i]);
  }
  return g;
}
}  // namespace detail

/// Tiles a diff into the coarse and fine grids. The diff's width/height ratio
/// must agree with `aspect_ratio` to within one coarse cell, and the image must
/// have at least one pixel per fine cell.
inline RegionGridSet region_grids(const DiffMap& diff, double aspect_ratio) {
  const int x = coarse_columns(aspect_ratio);
  const double measured = 10.0 * diff.width() / diff.height();
  if (std::abs(measured - x) > 1.0) {
    throw Error(ErrorCode::DimensionMismatch, "diff map aspect ratio disagrees with board aspect ratio");
  }
  RegionGridSet out;
  out.columns = x;
  out.coarse = detail::to_grid(cell_counts(diff, x, kCoarseRows));
  out.fine = detail::to_grid(cell_counts(diff, x * kFineFactor, kCoarseRows * kFineFactor));
  return out;
}

/// Overload taking the tolerance explicitly, re-thresholding the stored diff.
inline RegionGridSet region_grids(const DiffMap& diff, double aspect_ratio, int per_pixel_tolerance) {
  DiffMap retol = diff;
  retol.tolerance = per_pixel_tolerance;
  return region_grids(retol, aspect_ratio);
}

}  // namespace reboard::imaging
