#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "reboard/imaging/color.hpp"
#include "reboard/imaging/components.hpp"
#include "reboard/imaging/diff.hpp"

namespace reboard::motion {

using imaging::GrayImage;
using imaging::Mask;
using imaging::Rect;

struct MotionConfig {
  double motion_gate = 0.05;      // fraction of frame pixels that must change
  double min_blob_area = 0.015;   // fractions of frame area
  double max_blob_area = 0.45;
  int pixel_tolerance = imaging::kDefaultPixelTolerance;
  int aggregation_frames = 1;     // diff against the frame this many samples back

  void validate() const {
    if (!(motion_gate > 0.0 && motion_gate < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "motion_gate must lie in (0,1)");
    }
    if (!(min_blob_area > 0.0 && min_blob_area < max_blob_area && max_blob_area <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "blob area band must satisfy 0 < min < max <= 1");
    }
    if (pixel_tolerance < 0 || aggregation_frames < 1) {
      throw Error(ErrorCode::InvalidArgument, "invalid tolerance or aggregation window");
    }
  }
  friend bool operator==(const MotionConfig&, const MotionConfig&) = default;
};

struct Blob {
  Rect box;
  std::size_t area = 0;  // set pixels inside the box

  friend bool operator==(const Blob&, const Blob&) = default;
};

struct MotionSample {
  std::string camera_id;
  Timestamp timestamp{};
  double changed_fraction = 0.0;
  int person_count = 0;

  /// True when the frame cleared the motion gate.
  bool motion = false;
};

struct FrameMotion {
  double changed_fraction = 0.0;
  Mask mask;
};

inline FrameMotion frame_motion(const GrayImage& prev, const GrayImage& cur, const MotionConfig& cfg) {
  const auto d = imaging::pixel_diff(prev, cur, cfg.pixel_tolerance);
  return {d.changed_fraction, Mask::from_diff(d)};
}

/// Repeatedly joins blobs whose boxes overlap into their union box until no
/// two boxes overlap. Areas add.
inline std::vector<Blob> merge_overlapping(std::vector<Blob> blobs) {
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < blobs.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < blobs.size(); ++j) {
        if (blobs[i].box.overlaps(blobs[j].box)) {
          blobs[i].box = blobs[i].box.united(blobs[j].box);
          blobs[i].area += blobs[j].area;
          blobs.erase(blobs.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
          break;
        }
      }
    }
  }
  return blobs;
}

/// Rectilinear motion blobs: 8-connected components, boxes merged while
/// they overlap, then kept only if the pixel area lies in the person band.
inline std::vector<Blob> extract_blobs(const Mask& motion_mask, const MotionConfig& cfg) {
  const auto components = imaging::connected_components(motion_mask, imaging::Connectivity::Eight);
  std::vector<Blob> blobs;
  blobs.reserve(components.size());
  for (const auto& c : components) blobs.push_back({c.box, c.area});
  blobs = merge_overlapping(std::move(blobs));

  const double frame_area = double(motion_mask.width()) * motion_mask.height();
  std::vector<Blob> kept;
  for (const auto& b : blobs) {
    const double frac = double(b.area) / frame_area;
    if (frac >= cfg.min_blob_area && frac <= cfg.max_blob_area) kept.push_back(b);
  }
  return kept;
}

/// Blobs stand in for people; there is no tracking or identity.
inline int estimate_person_count(const std::vector<Blob>& blobs) { return static_cast<int>(blobs.size()); }

/// Per-camera frame-to-frame motion analysis. The background model is the
/// frame `aggregation_frames` samples earlier.
class MotionDetector {
 public:
  MotionDetector(std::string camera_id, MotionConfig cfg) : camera_(std::move(camera_id)), cfg_(cfg) {
    cfg_.validate();
  }

  MotionSample process(const GrayImage& frame, Timestamp ts) {
    MotionSample s{camera_, ts, 0.0, 0, false};
    if (!history_.empty()) {
      const FrameMotion fm = frame_motion(history_.front(), frame, cfg_);
      s.changed_fraction = fm.changed_fraction;
      if (fm.changed_fraction > cfg_.motion_gate) {
        s.motion = true;
        s.person_count = estimate_person_count(extract_blobs(fm.mask, cfg_));
      }
    }
    history_.push_back(frame);
    while (static_cast<int>(history_.size()) > cfg_.aggregation_frames) history_.pop_front();
    return s;
  }

  MotionSample process(const imaging::RawFrame& frame) {
    return process(imaging::to_grayscale(frame), frame.timestamp);
  }

  void reset() { history_.clear(); }
  const MotionConfig& config() const noexcept { return cfg_; }

 private:
  std::string camera_;
  MotionConfig cfg_;
  std::deque<GrayImage> history_;
};

}  // namespace reboard::motion
