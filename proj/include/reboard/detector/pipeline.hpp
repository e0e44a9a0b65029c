#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reboard/capture/capture.hpp"
#include "reboard/collab/collab.hpp"
#include "reboard/imaging/color.hpp"
#include "reboard/motion/motion.hpp"

namespace reboard::detector {

/// How a capture lane combines the motion gate with the filtered-diff threshold.
enum class Variant {
  Combined,       // motion gate + threshold
  MotionOnly,     // motion gate, any clean burst is captured
  FilteringOnly,  // threshold, gate forced open
};

inline constexpr std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::Combined: return "combined";
    case Variant::MotionOnly: return "motion_only";
    case Variant::FilteringOnly: return "filtering_only";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "combined") return Variant::Combined;
  if (s == "motion_only" || s == "motion-only") return Variant::MotionOnly;
  if (s == "filtering_only" || s == "filtering-only") return Variant::FilteringOnly;
  throw Error(ErrorCode::InvalidArgument, "unknown variant '" + std::string(s) + "'");
}

/// Everything a detector needs to run one camera.
struct CameraSettings {
  std::string camera_id;
  imaging::BoardGeometry geometry;
  motion::MotionConfig motion;
  collab::CollabConfig collab;
  capture::CaptureConfig capture;
  bool capture_enabled = true;

  void validate() const {
    if (camera_id.empty()) throw Error(ErrorCode::InvalidArgument, "camera id must not be empty");
    imaging::validate_geometry(geometry);
    motion.validate();
    collab.validate();
    capture.validate();
  }
};

struct AttemptLog {
  std::size_t lane = 0;
  Timestamp at{};
  capture::Outcome outcome = capture::Outcome::NoMotion;
  double changed_fraction = 0.0;
};

struct LaneCapture {
  std::size_t lane = 0;
  capture::CaptureEvent event;
};

struct StepOutput {
  motion::MotionSample sample;
  std::vector<collab::CollaborationInterval> intervals;
  std::vector<LaneCapture> captures;
  std::vector<AttemptLog> attempts;
};

/// Motion, collaboration and capture for one camera, driven frame by frame.
/// Several capture lanes can share the same motion stream.
class CameraPipeline {
 public:
  explicit CameraPipeline(CameraSettings settings, std::vector<Variant> lanes = {Variant::Combined})
      : settings_((settings.validate(), std::move(settings))),
        motion_(settings_.camera_id, settings_.motion),
        collab_(settings_.camera_id, settings_.collab) {
    if (lanes.empty()) throw Error(ErrorCode::InvalidArgument, "pipeline needs at least one capture lane");
    for (Variant v : lanes) {
      lanes_.push_back(Lane{v, capture::CaptureDetector(settings_.camera_id, settings_.geometry, settings_.capture)});
      lanes_.back().detector.set_enabled(settings_.capture_enabled);
    }
  }

  /// Analyses one frame of the camera stream and runs any capture attempt
  /// that has come due. Bursts are grabbed from `source` starting at the
  /// frame's timestamp.
  StepOutput process(const imaging::RawFrame& frame, capture::FrameSource& source) {
    StepOutput out;
    out.sample = motion_.process(frame);
    out.intervals = collab_.feed(out.sample);
    const Timestamp now = out.sample.timestamp;
    for (auto& lane : lanes_) lane.pending = lane.pending || out.sample.motion;

    if (!next_attempt_ || now >= *next_attempt_) {
      next_attempt_ = now + settings_.capture.poll_cadence;
      for (std::size_t i = 0; i < lanes_.size(); ++i) {
        auto& lane = lanes_[i];
        const bool gate = lane.variant == Variant::FilteringOnly || lane.pending;
        auto r = lane.detector.attempt(source, now, gate, lane.variant == Variant::MotionOnly);
        if (capture::examined_board(r.outcome)) lane.pending = false;
        out.attempts.push_back({i, now, r.outcome, r.changed_fraction});
        if (r.event) out.captures.push_back({i, std::move(*r.event)});
      }
    }
    return out;
  }

  /// End of stream: closes any open collaboration interval.
  std::vector<collab::CollaborationInterval> finish(Timestamp now) { return collab_.flush(now); }

  capture::CaptureEvent manual_capture(capture::FrameSource& source, Timestamp now, std::string request_id = {},
                                       std::size_t lane = 0) {
    return lanes_.at(lane).detector.manual_capture(source, now, std::move(request_id));
  }

  void set_capture_enabled(bool on) {
    settings_.capture_enabled = on;
    for (auto& lane : lanes_) {
      lane.detector.set_enabled(on);
      if (!lane.detector.has_reference()) lane.pending = true;
    }
  }

  /// Applies a new configuration snapshot. Motion and collaboration state
  /// restart when their configs change; a geometry change drops the capture
  /// reference so the next clean burst becomes the new baseline.
  void update_settings(const CameraSettings& s) {
    s.validate();
    if (s.camera_id != settings_.camera_id) throw Error(ErrorCode::InvalidArgument, "camera id cannot change");
    if (!(s.motion == settings_.motion)) motion_ = motion::MotionDetector(s.camera_id, s.motion);
    if (!(s.collab == settings_.collab)) collab_ = collab::CollaborationDetector(s.camera_id, s.collab);
    for (auto& lane : lanes_) {
      const bool had_reference = lane.detector.has_reference();
      lane.detector.set_config(s.capture);
      lane.detector.set_geometry(s.geometry);
      if (had_reference && !lane.detector.has_reference()) lane.pending = true;
    }
    settings_ = s;
    set_capture_enabled(s.capture_enabled);
  }

  const CameraSettings& settings() const noexcept { return settings_; }
  std::size_t lane_count() const noexcept { return lanes_.size(); }
  Variant lane_variant(std::size_t i) const { return lanes_.at(i).variant; }
  const capture::CaptureDetector& lane_detector(std::size_t i) const { return lanes_.at(i).detector; }
  bool motion_pending(std::size_t i) const { return lanes_.at(i).pending; }
  const collab::CollaborationDetector& collaboration() const noexcept { return collab_; }

 private:
  struct Lane {
    Variant variant;
    capture::CaptureDetector detector;
    bool pending = true;  // no reference yet, so the first attempt must look
  };

  CameraSettings settings_;
  motion::MotionDetector motion_;
  collab::CollaborationDetector collab_;
  std::vector<Lane> lanes_;
  std::optional<Timestamp> next_attempt_;
};

}  // namespace reboard::detector
