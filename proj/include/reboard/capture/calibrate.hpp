#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "reboard/capture/capture.hpp"

namespace reboard::capture {

/// Synthetic board used to calibrate the change threshold.
struct CalibrationScene {
  double aspect_ratio = 1.6;
  int board_luma = 200;
  int noise_amplitude = 2;  // uniform integer jitter in [-a, a]
  int noise_seeds = 8;
};

struct Calibration {
  double threshold = 0.0;
  double mark_response = 0.0;  // weakest filtered-diff fraction of the reference mark
  double noise_floor = 0.0;    // strongest filtered-diff fraction between blank boards
};

namespace detail {

inline GrayImage noisy_board(int w, int h, int luma, int amplitude, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> jitter(-amplitude, amplitude);
  GrayImage img(w, h);
  for (auto& p : img.data()) p = static_cast<std::uint8_t>(std::clamp(luma + jitter(rng), 0, 255));
  return img;
}

/// Darkens a centred square of `area` pixels by `contrast`.
inline void draw_mark(GrayImage& img, double area, int contrast) {
  const int side = std::max(1, static_cast<int>(std::lround(std::sqrt(area))));
  const int x0 = (img.width() - side) / 2, y0 = (img.height() - side) / 2;
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) img(x, y) = static_cast<std::uint8_t>(std::max(0, img(x, y) - contrast));
}

}  // namespace detail

/// Picks the change threshold so that a mark covering 1/100 of the board at
/// `stroke_contrast` clears it through the full filter + diff pipeline. The
/// threshold sits halfway between the blank-board noise floor and the weakest
/// mark response observed across the noise seeds.
inline Calibration calibrate_threshold(long long board_area, int stroke_contrast, const CaptureConfig& cfg,
                                       const CalibrationScene& scene = {}) {
  if (board_area < 100) throw Error(ErrorCode::InvalidArgument, "board area too small to calibrate");
  const int h = std::max(1, static_cast<int>(std::lround(std::sqrt(board_area / scene.aspect_ratio))));
  const int w = std::max(1, static_cast<int>(std::lround(scene.aspect_ratio * h)));
  const double mark_area = double(w) * h / 100.0;

  Calibration cal;
  cal.mark_response = 1.0;
  for (int s = 0; s < scene.noise_seeds; ++s) {
    const auto seed = static_cast<std::uint32_t>(2 * s + 1);
    const GrayImage before = detail::noisy_board(w, h, scene.board_luma, scene.noise_amplitude, seed);
    const GrayImage blank = detail::noisy_board(w, h, scene.board_luma, scene.noise_amplitude, seed + 1);
    GrayImage marked = blank;
    detail::draw_mark(marked, mark_area, stroke_contrast);
    const GrayImage ref = imaging::content_filter(before, cfg.high_pass_k);
    const double noise =
        imaging::pixel_diff(ref, imaging::content_filter(blank, cfg.high_pass_k), cfg.pixel_tolerance).changed_fraction;
    const double mark =
        imaging::pixel_diff(ref, imaging::content_filter(marked, cfg.high_pass_k), cfg.pixel_tolerance).changed_fraction;
    cal.noise_floor = std::max(cal.noise_floor, noise);
    cal.mark_response = std::min(cal.mark_response, mark);
  }
  // The gap must be worth more than a handful of pixels.
  if (!(cal.mark_response > cal.noise_floor + 4.0 / (double(w) * h))) {
    throw Error(ErrorCode::ContrastTooLow, "mark response indistinguishable from the noise floor");
  }
  cal.threshold = cal.noise_floor + 0.5 * (cal.mark_response - cal.noise_floor);
  return cal;
}

}  // namespace reboard::capture
