#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "reboard/error.hpp"
#include "reboard/time.hpp"

namespace reboard::imaging {

/// Camera sample: row-major interleaved 8-bit RGB.
struct RawFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
  Timestamp timestamp{};

  RawFrame() = default;
  RawFrame(int w, int h, Timestamp ts = {})
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0), timestamp(ts) {
    validate();
  }
  RawFrame(int w, int h, std::vector<std::uint8_t> rgb, Timestamp ts = {})
      : width(w), height(h), pixels(std::move(rgb)), timestamp(ts) {
    validate();
  }

  void validate() const {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCode::InvalidArgument, "frame dimensions must be positive");
    }
    if (pixels.size() != static_cast<std::size_t>(width) * height * 3) {
      throw Error(ErrorCode::InvalidArgument, "frame buffer length must be width*height*3");
    }
  }

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  }
};

/// Row-major 8-bit luminance image.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height), pixels_(checked_size(width, height), fill) {}
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != checked_size(width, height)) {
      throw Error(ErrorCode::InvalidArgument, "gray buffer length must be width*height");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t operator()(int x, int y) const noexcept {
    return pixels_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::uint8_t& operator()(int x, int y) noexcept {
    return pixels_[static_cast<std::size_t>(y) * width_ + x];
  }

  /// Edge-replicated access: coordinates outside the image clamp to the border.
  std::uint8_t clamped(int x, int y) const noexcept {
    x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
    y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
    return (*this)(x, y);
  }

  std::span<const std::uint8_t> data() const noexcept { return pixels_; }
  std::span<std::uint8_t> data() noexcept { return pixels_; }

  bool same_size(const GrayImage& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  static std::size_t checked_size(int w, int h) {
    if (w <= 0 || h <= 0) {
      throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    }
    return static_cast<std::size_t>(w) * h;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

inline void require_same_size(const GrayImage& a, const GrayImage& b, const char* what) {
  if (!a.same_size(b)) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()));
  }
}

/// Integer pixel rectangle, half-open on the right and bottom.
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const noexcept { return x + w; }
  int bottom() const noexcept { return y + h; }
  long long area() const noexcept { return static_cast<long long>(w) * h; }
  bool empty() const noexcept { return w <= 0 || h <= 0; }

  bool overlaps(const Rect& o) const noexcept {
    return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom();
  }
  bool contains(const Rect& o) const noexcept {
    return o.x >= x && o.y >= y && o.right() <= right() && o.bottom() <= bottom();
  }
  Rect united(const Rect& o) const noexcept {
    const int l = x < o.x ? x : o.x;
    const int t = y < o.y ? y : o.y;
    const int r = right() > o.right() ? right() : o.right();
    const int b = bottom() > o.bottom() ? bottom() : o.bottom();
    return {l, t, r - l, b - t};
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

}  // namespace reboard::imaging
