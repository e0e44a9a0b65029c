#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "reboard/imaging/color.hpp"
#include "reboard/imaging/image.hpp"

namespace reboard::imaging {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Board calibration: the four corners in raw-frame coordinates ordered
/// top-left, top-right, bottom-right, bottom-left, plus width/height ratio.
struct BoardGeometry {
  std::array<Point, 4> corners{};
  double aspect_ratio = 1.0;

  friend bool operator==(const BoardGeometry&, const BoardGeometry&) = default;
};

/// Output width for a rectified image of the given height.
inline int rectified_width(double aspect_ratio, int out_height) {
  return static_cast<int>(std::lround(aspect_ratio * out_height));
}

/// 3x3 projective transform acting on (x, y, 1).
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  explicit Homography(const Eigen::Matrix3d& m) : m_(m) {}

  /// Solves for the transform taking each `from[i]` to `to[i]`.
  static Homography from_correspondences(const std::array<Point, 4>& from,
                                         const std::array<Point, 4>& to) {
    Eigen::Matrix<double, 8, 8> a;
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i) {
      const double x = from[i].x, y = from[i].y, u = to[i].x, v = to[i].y;
      a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
      a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
      b(2 * i) = u;
      b(2 * i + 1) = v;
    }
    Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) {
      throw Error(ErrorCode::DegenerateGeometry, "homography system is singular");
    }
    const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
    Eigen::Matrix3d m;
    m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
    return Homography(m);
  }

  Point apply(Point p) const noexcept {
    const Eigen::Vector3d r = m_ * Eigen::Vector3d(p.x, p.y, 1.0);
    return {r.x() / r.z(), r.y() / r.z()};
  }

  Homography inverse() const { return Homography(m_.inverse()); }
  const Eigen::Matrix3d& matrix() const noexcept { return m_; }

 private:
  Eigen::Matrix3d m_;
};

namespace detail {
inline double cross(Point o, Point a, Point b) noexcept {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}
}  // namespace detail

/// Throws DegenerateGeometry unless the corners form a strictly convex,
/// clockwise (in y-down image coordinates) quadrilateral that is not
/// near-collinear anywhere.
inline void validate_geometry(const BoardGeometry& g) {
  if (!(g.aspect_ratio > 0.0) || !std::isfinite(g.aspect_ratio)) {
    throw Error(ErrorCode::DegenerateGeometry, "aspect ratio must be positive");
  }
  double max_edge2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Point a = g.corners[i], b = g.corners[(i + 1) % 4];
    if (!std::isfinite(a.x) || !std::isfinite(a.y)) {
      throw Error(ErrorCode::DegenerateGeometry, "non-finite corner");
    }
    max_edge2 = std::max(max_edge2, (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y));
  }
  if (max_edge2 <= 0.0) {
    throw Error(ErrorCode::DegenerateGeometry, "corners coincide");
  }
  for (int i = 0; i < 4; ++i) {
    const double c = detail::cross(g.corners[i], g.corners[(i + 1) % 4], g.corners[(i + 2) % 4]);
    // Relative turn measure: sine of the corner angle scaled by edge lengths.
    if (c <= 1e-3 * max_edge2) {
      throw Error(ErrorCode::DegenerateGeometry,
                  "corners must form a strictly convex quadrilateral ordered TL, TR, BR, BL");
    }
  }
}

/// Output-to-source and source-to-output transforms for a board. Output pixel
/// centers (0,0), (W-1,0), (W-1,H-1), (0,H-1) coincide with the four corners.
struct BoardTransform {
  Homography to_source;
  Homography to_output;
  int width = 0;
  int height = 0;

  static BoardTransform make(const BoardGeometry& g, int out_height) {
    if (out_height <= 1) {
      throw Error(ErrorCode::InvalidArgument, "out_height must be greater than 1");
    }
    validate_geometry(g);
    const int w = rectified_width(g.aspect_ratio, out_height);
    if (w <= 1) {
      throw Error(ErrorCode::DegenerateGeometry, "rectified width collapses");
    }
    const std::array<Point, 4> dst{Point{0, 0}, Point{double(w - 1), 0},
                                   Point{double(w - 1), double(out_height - 1)},
                                   Point{0, double(out_height - 1)}};
    auto to_src = Homography::from_correspondences(dst, g.corners);
    return {to_src, to_src.inverse(), w, out_height};
  }
};

/// Precomputed bilinear sampling map from a fixed-size gray source into the
/// rectified board image. Reused across every frame of one camera.
class Rectifier {
 public:
  Rectifier(const BoardGeometry& geometry, int out_height, int source_width, int source_height)
      : transform_(BoardTransform::make(geometry, out_height)),
        src_w_(source_width),
        src_h_(source_height) {
    if (src_w_ <= 0 || src_h_ <= 0) {
      throw Error(ErrorCode::InvalidArgument, "source dimensions must be positive");
    }
    const std::size_t n = static_cast<std::size_t>(transform_.width) * transform_.height;
    taps_.resize(n);
    for (int v = 0; v < transform_.height; ++v) {
      for (int u = 0; u < transform_.width; ++u) {
        const Point s = transform_.to_source.apply({double(u), double(v)});
        taps_[static_cast<std::size_t>(v) * transform_.width + u] = make_tap(s);
      }
    }
  }

  int width() const noexcept { return transform_.width; }
  int height() const noexcept { return transform_.height; }
  const BoardTransform& transform() const noexcept { return transform_; }

  GrayImage operator()(const GrayImage& src) const {
    if (src.width() != src_w_ || src.height() != src_h_) {
      throw Error(ErrorCode::DimensionMismatch, "frame size differs from rectifier calibration");
    }
    GrayImage out(transform_.width, transform_.height);
    auto dst = out.data();
    auto in = src.data();
    for (std::size_t i = 0; i < taps_.size(); ++i) {
      const Tap& t = taps_[i];
      const double v = t.w00 * in[t.i00] + t.w01 * in[t.i01] + t.w10 * in[t.i10] + t.w11 * in[t.i11];
      dst[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
    return out;
  }

  GrayImage operator()(const RawFrame& frame) const { return (*this)(to_grayscale(frame)); }

 private:
  struct Tap {
    std::size_t i00, i01, i10, i11;
    double w00, w01, w10, w11;
  };

  Tap make_tap(Point s) const noexcept {
    const double sx = std::clamp(s.x, 0.0, double(src_w_ - 1));
    const double sy = std::clamp(s.y, 0.0, double(src_h_ - 1));
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    const int x1 = std::min(x0 + 1, src_w_ - 1);
    const int y1 = std::min(y0 + 1, src_h_ - 1);
    const double fx = sx - x0, fy = sy - y0;
    auto idx = [this](int x, int y) { return static_cast<std::size_t>(y) * src_w_ + x; };
    return {idx(x0, y0), idx(x1, y0), idx(x0, y1), idx(x1, y1),
            (1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  }

  BoardTransform transform_;
  int src_w_;
  int src_h_;
  std::vector<Tap> taps_;
};

/// Warps the board quadrilateral to an axis-aligned grayscale image of
/// round(aspect * out_height) x out_height. Everything outside the board is
/// cropped away.
inline GrayImage rectify(const RawFrame& frame, const BoardGeometry& geometry, int out_height) {
  frame.validate();
  return Rectifier(geometry, out_height, frame.width, frame.height)(frame);
}

}  // namespace reboard::imaging
