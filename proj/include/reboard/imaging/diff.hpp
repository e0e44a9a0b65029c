#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "reboard/imaging/image.hpp"

namespace reboard::imaging {

/// Default per-pixel tolerance (luminance units) below which a difference is
/// treated as sensor noise.
inline constexpr int kDefaultPixelTolerance = 12;

/// Per-pixel absolute difference between two images, with the fraction of
/// pixels whose difference exceeds `tolerance`.
struct DiffMap {
  GrayImage diff;
  int tolerance = kDefaultPixelTolerance;
  std::size_t changed_pixels = 0;
  double changed_fraction = 0.0;

  int width() const noexcept { return diff.width(); }
  int height() const noexcept { return diff.height(); }
  bool changed(int x, int y) const noexcept { return diff(x, y) > tolerance; }
};

inline DiffMap pixel_diff(const GrayImage& a, const GrayImage& b,
                          int per_pixel_tolerance = kDefaultPixelTolerance) {
  require_same_size(a, b, "pixel_diff");
  if (per_pixel_tolerance < 0) {
    throw Error(ErrorCode::InvalidArgument, "per-pixel tolerance must be non-negative");
  }
  DiffMap out{GrayImage(a.width(), a.height()), per_pixel_tolerance, 0, 0.0};
  auto pa = a.data();
  auto pb = b.data();
  auto pd = out.diff.data();
  std::size_t changed = 0;
  for (std::size_t i = 0; i < pd.size(); ++i) {
    const int d = std::abs(int(pa[i]) - int(pb[i]));
    pd[i] = static_cast<std::uint8_t>(d);
    changed += d > per_pixel_tolerance ? 1 : 0;
  }
  out.changed_pixels = changed;
  out.changed_fraction = static_cast<double>(changed) / static_cast<double>(pd.size());
  return out;
}

inline double mean_brightness(const GrayImage& img) {
  auto p = img.data();
  const std::uint64_t sum = std::accumulate(p.begin(), p.end(), std::uint64_t{0});
  return static_cast<double>(sum) / static_cast<double>(p.size());
}

/// Boolean per-pixel exceedance mask of a diff.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height) : width_(width), height_(height), bits_(std::size_t(width) * height, 0) {}

  static Mask from_diff(const DiffMap& d) {
    Mask m(d.width(), d.height());
    auto src = d.diff.data();
    for (std::size_t i = 0; i < src.size(); ++i) m.bits_[i] = src[i] > d.tolerance ? 1 : 0;
    return m;
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool operator()(int x, int y) const noexcept { return bits_[std::size_t(y) * width_ + x] != 0; }
  void set(int x, int y, bool v = true) noexcept { bits_[std::size_t(y) * width_ + x] = v ? 1 : 0; }
  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool any() const noexcept { return count() > 0; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace reboard::imaging
