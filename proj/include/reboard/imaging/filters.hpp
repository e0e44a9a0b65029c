#pragma once

#include <cmath>
#include <cstdint>

#include "reboard/imaging/image.hpp"

namespace reboard::imaging {

namespace detail {
inline std::uint8_t clamp_u8(long v) noexcept {
  return static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
}
}  // namespace detail

/// Stroke-accentuating sharpen with kernel {0,-1,0; -1,k,-1; 0,-1,0}.
/// Borders replicate edge pixels; output is rounded and clamped to [0,255].
inline GrayImage high_pass(const GrayImage& img, double k) {
  if (!(k > 4.0)) {
    throw Error(ErrorCode::InvalidArgument, "high_pass requires k > 4");
  }
  const int w = img.width();
  const int h = img.height();
  GrayImage out(w, h);
  const bool integral_k = k == std::floor(k);
  const long ik = static_cast<long>(k);
  for (int y = 0; y < h; ++y) {
    const int ym = y > 0 ? y - 1 : 0;
    const int yp = y + 1 < h ? y + 1 : h - 1;
    for (int x = 0; x < w; ++x) {
      const int xm = x > 0 ? x - 1 : 0;
      const int xp = x + 1 < w ? x + 1 : w - 1;
      const long ring = static_cast<long>(img(x, ym)) + img(x, yp) + img(xm, y) + img(xp, y);
      if (integral_k) {
        out(x, y) = detail::clamp_u8(ik * img(x, y) - ring);
      } else {
        out(x, y) = detail::clamp_u8(std::lround(k * img(x, y) - static_cast<double>(ring)));
      }
    }
  }
  return out;
}

/// 3x3 box blur, rounded to nearest, edge replication at borders.
inline GrayImage low_pass(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      unsigned sum = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          sum += img.clamped(x + dx, y + dy);
        }
      }
      // sum/9 is never exactly half-integral, so +4 rounds to nearest.
      out(x, y) = static_cast<std::uint8_t>((sum + 4u) / 9u);
    }
  }
  return out;
}

/// The change-detection preprocessing chain: high pass, then low pass.
inline GrayImage content_filter(const GrayImage& img, double k) { return low_pass(high_pass(img, k)); }

}  // namespace reboard::imaging
