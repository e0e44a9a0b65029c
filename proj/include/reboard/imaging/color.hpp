#pragma once

#include "reboard/imaging/image.hpp"

namespace reboard::imaging {

/// Rec.601 luma, rounded half-up. Computed in integer thousandths so the
/// rounding is exact.
inline std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  const unsigned weighted = 299u * r + 587u * g + 114u * b;
  return static_cast<std::uint8_t>((weighted + 500u) / 1000u);
}

inline GrayImage to_grayscale(const RawFrame& frame) {
  frame.validate();
  GrayImage out(frame.width, frame.height);
  auto dst = out.data();
  const auto& src = frame.pixels;
  for (std::size_t i = 0, n = dst.size(); i < n; ++i) {
    dst[i] = luma(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
  }
  return out;
}

/// Expands a gray image to an RGB frame (R = G = B).
inline RawFrame to_frame(const GrayImage& img, Timestamp ts = {}) {
  RawFrame frame(img.width(), img.height(), ts);
  auto src = img.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    frame.pixels[3 * i] = frame.pixels[3 * i + 1] = frame.pixels[3 * i + 2] = src[i];
  }
  return frame;
}

}  // namespace reboard::imaging
