#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "reboard/capture/frame_source.hpp"
#include "reboard/imaging/components.hpp"
#include "reboard/imaging/diff.hpp"
#include "reboard/imaging/filters.hpp"
#include "reboard/imaging/geometry.hpp"
#include "reboard/imaging/grids.hpp"

namespace reboard::capture {

using imaging::BoardGeometry;
using imaging::GrayImage;
using imaging::RegionGridSet;

struct CaptureConfig {
  int burst_size = 3;
  Millis burst_spacing{200};
  double burst_agreement_tolerance = 0.005;  // max changed fraction between burst frames
  double min_brightness = 40.0;
  double static_occlusion_area = 0.10;       // fraction of board area
  double occlusion_fill_ratio = 0.6;
  double high_pass_k = 5.0;
  double change_threshold = 0.004;            // t
  double cell_change_tolerance = 0.02;
  int pixel_tolerance = imaging::kDefaultPixelTolerance;
  int out_height = 480;
  Millis poll_cadence{10'000};
  int manual_retries = 5;

  void validate() const {
    if (burst_size < 2) throw Error(ErrorCode::InvalidArgument, "burst_size must be at least 2");
    auto unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (!unit(burst_agreement_tolerance) || !unit(static_occlusion_area) || !unit(change_threshold) ||
        !unit(cell_change_tolerance) || !unit(occlusion_fill_ratio)) {
      throw Error(ErrorCode::InvalidArgument, "capture fractions must lie in (0,1)");
    }
    if (!(high_pass_k > 4.0)) throw Error(ErrorCode::InvalidArgument, "high_pass_k must exceed 4");
    if (out_height < 100) throw Error(ErrorCode::InvalidArgument, "out_height must be at least 100");
    if (burst_spacing < Millis::zero() || poll_cadence <= Millis::zero() || manual_retries < 1) {
      throw Error(ErrorCode::InvalidArgument, "invalid capture timing");
    }
  }
  friend bool operator==(const CaptureConfig&, const CaptureConfig&) = default;
};

enum class Trigger { Automatic, Manual };

inline constexpr std::string_view to_string(Trigger t) noexcept {
  return t == Trigger::Manual ? "manual" : "automatic";
}

struct CaptureEvent {
  std::string camera_id;
  Timestamp timestamp{};
  GrayImage image;  // rectified, unfiltered
  RegionGridSet grids;
  Trigger trigger = Trigger::Automatic;
  int changed_cell_count = 0;
  double changed_fraction = 0.0;
  std::string request_id;  // manual requests relayed by the coordinator
};

enum class Outcome {
  NoMotion,     // gate closed: nothing examined
  Disabled,     // capture switched off by the owner
  Unavailable,  // frame source failed
  Unstable,     // burst frames disagree, someone is moving
  TooDark,
  Occluded,     // large solid static region in front of the board
  Baseline,     // first clean image, becomes the reference
  NoChange,     // clean image, diff at or below threshold
  Captured,
};

inline constexpr std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::NoMotion: return "no_motion";
    case Outcome::Disabled: return "disabled";
    case Outcome::Unavailable: return "unavailable";
    case Outcome::Unstable: return "unstable";
    case Outcome::TooDark: return "too_dark";
    case Outcome::Occluded: return "occluded";
    case Outcome::Baseline: return "baseline";
    case Outcome::NoChange: return "no_change";
    case Outcome::Captured: return "captured";
  }
  return "?";
}

/// A clean image passed every quality check and was compared to the reference.
inline constexpr bool examined_board(Outcome o) noexcept {
  return o == Outcome::Baseline || o == Outcome::NoChange || o == Outcome::Captured;
}

struct AttemptResult {
  Outcome outcome = Outcome::NoMotion;
  std::optional<CaptureEvent> event;
  double changed_fraction = 0.0;
};

/// Solid static occluder test. A changed region (vs. the last accepted image)
/// counts as an occluder when it covers more than `static_occlusion_area` of
/// the board and fills more than `occlusion_fill_ratio` of its bounding box.
/// A region whose box spans the whole board is an illumination change, not
/// an object in front of the board.
inline bool check_static_occlusion(const GrayImage& candidate, const GrayImage& last_accepted,
                                   const CaptureConfig& cfg) {
  const auto diff = imaging::pixel_diff(candidate, last_accepted, cfg.pixel_tolerance);
  if (diff.changed_fraction <= cfg.static_occlusion_area) return false;
  const double board = double(candidate.width()) * candidate.height();
  for (const auto& c : imaging::connected_components(imaging::Mask::from_diff(diff))) {
    const bool spans_board = c.box.w >= candidate.width() * 0.95 && c.box.h >= candidate.height() * 0.95;
    if (spans_board) continue;
    if (double(c.area) / board > cfg.static_occlusion_area && c.fill_ratio() > cfg.occlusion_fill_ratio) {
      return true;
    }
  }
  return false;
}

/// Per-pixel median of the burst (mean of the middle pair for even sizes).
inline GrayImage burst_median(const std::vector<GrayImage>& burst) {
  GrayImage out(burst.front().width(), burst.front().height());
  std::vector<int> v(burst.size());
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    for (std::size_t k = 0; k < burst.size(); ++k) v[k] = burst[k].data()[i];
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    dst[i] = static_cast<std::uint8_t>(v.size() % 2 ? v[m] : (v[m - 1] + v[m] + 1) / 2);
  }
  return out;
}

/// Content-change state machine for one camera. Owns the last accepted
/// content image (unfiltered for archiving, filtered for diffing).
class CaptureDetector {
 public:
  CaptureDetector(std::string camera_id, BoardGeometry geometry, CaptureConfig cfg)
      : camera_(std::move(camera_id)), geometry_(geometry), cfg_(cfg) {
    cfg_.validate();
    imaging::validate_geometry(geometry_);
  }

  /// Polled on the capture cadence. `bypass_threshold` emits for any clean
  /// burst (the motion-only wiring).
  AttemptResult attempt(FrameSource& source, Timestamp now, bool motion_since_last,
                        bool bypass_threshold = false) {
    if (!enabled_) return {Outcome::Disabled, std::nullopt, 0.0};
    if (!motion_since_last) return {Outcome::NoMotion, std::nullopt, 0.0};

    std::optional<GrayImage> candidate;
    try {
      candidate = acquire(source, now);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SourceUnavailable) throw;
      return {Outcome::Unavailable, std::nullopt, 0.0};
    }
    if (!candidate) return {last_reject_, std::nullopt, 0.0};

    GrayImage filtered = imaging::content_filter(*candidate, cfg_.high_pass_k);
    if (!reference_) {
      accept(std::move(*candidate), std::move(filtered));
      return {Outcome::Baseline, std::nullopt, 0.0};
    }
    const auto diff = imaging::pixel_diff(filtered, reference_->filtered, cfg_.pixel_tolerance);
    if (!bypass_threshold && !(diff.changed_fraction > cfg_.change_threshold)) {
      return {Outcome::NoChange, std::nullopt, diff.changed_fraction};
    }
    CaptureEvent ev = make_event(*candidate, diff, now, Trigger::Automatic);
    accept(std::move(*candidate), std::move(filtered));
    return {Outcome::Captured, std::move(ev), diff.changed_fraction};
  }

  /// User-initiated capture: quality checks apply, the change threshold does not.
  CaptureEvent manual_capture(FrameSource& source, Timestamp now, std::string request_id = {}) {
    if (!enabled_) throw Error(ErrorCode::CaptureDisabled, "capture disabled for camera " + camera_);
    const Millis retry_gap = cfg_.burst_spacing * (cfg_.burst_size + 1);
    for (int attempt = 0; attempt < cfg_.manual_retries; ++attempt) {
      const Timestamp at = now + retry_gap * attempt;
      auto candidate = acquire(source, at);
      if (!candidate) continue;
      GrayImage filtered = imaging::content_filter(*candidate, cfg_.high_pass_k);
      const GrayImage& ref = reference_ ? reference_->filtered : filtered;
      const auto diff = imaging::pixel_diff(filtered, ref, cfg_.pixel_tolerance);
      CaptureEvent ev = make_event(*candidate, diff, at, Trigger::Manual);
      ev.request_id = std::move(request_id);
      accept(std::move(*candidate), std::move(filtered));
      return ev;
    }
    throw Error(ErrorCode::Obstructed, "no unobstructed burst after " + std::to_string(cfg_.manual_retries) +
                                           " attempts on camera " + camera_);
  }

  /// Re-enabling drops the reference: whatever was written while capture was
  /// off becomes the new baseline instead of being archived.
  void set_enabled(bool on) noexcept {
    if (on && !enabled_) reference_.reset();
    enabled_ = on;
  }
  bool enabled() const noexcept { return enabled_; }
  bool has_reference() const noexcept { return reference_.has_value(); }
  const GrayImage* reference_image() const noexcept { return reference_ ? &reference_->image : nullptr; }
  const GrayImage* reference_filtered() const noexcept { return reference_ ? &reference_->filtered : nullptr; }

  void set_config(const CaptureConfig& cfg) {
    cfg.validate();
    const bool geometry_changed = cfg.out_height != cfg_.out_height;
    cfg_ = cfg;
    if (geometry_changed) {
      rectifier_.reset();
      reference_.reset();
    }
  }
  void set_geometry(const BoardGeometry& g) {
    imaging::validate_geometry(g);
    if (!(g == geometry_)) {
      geometry_ = g;
      rectifier_.reset();
      reference_.reset();
    }
  }
  const CaptureConfig& config() const noexcept { return cfg_; }
  const BoardGeometry& geometry() const noexcept { return geometry_; }
  const std::string& camera_id() const noexcept { return camera_; }

 private:
  struct Reference {
    GrayImage image;
    GrayImage filtered;
  };

  const imaging::Rectifier& rectifier_for(const imaging::RawFrame& f) {
    if (!rectifier_ || rect_src_w_ != f.width || rect_src_h_ != f.height) {
      rectifier_.emplace(geometry_, cfg_.out_height, f.width, f.height);
      rect_src_w_ = f.width;
      rect_src_h_ = f.height;
    }
    return *rectifier_;
  }

  /// Grabs a burst and runs the quality checks in order: agreement,
  /// brightness, static occlusion. Returns the burst median or nullopt with
  /// the rejection reason in last_reject_.
  std::optional<GrayImage> acquire(FrameSource& source, Timestamp at) {
    std::vector<GrayImage> burst;
    burst.reserve(cfg_.burst_size);
    for (int i = 0; i < cfg_.burst_size; ++i) {
      const auto frame = source.grab(at + cfg_.burst_spacing * i);
      burst.push_back(rectifier_for(frame)(frame));
    }
    for (std::size_t i = 1; i < burst.size(); ++i) {
      if (imaging::pixel_diff(burst[i - 1], burst[i], cfg_.pixel_tolerance).changed_fraction >
          cfg_.burst_agreement_tolerance) {
        last_reject_ = Outcome::Unstable;
        return std::nullopt;
      }
    }
    GrayImage candidate = burst_median(burst);
    if (imaging::mean_brightness(candidate) < cfg_.min_brightness) {
      last_reject_ = Outcome::TooDark;
      return std::nullopt;
    }
    if (reference_ && check_static_occlusion(candidate, reference_->image, cfg_)) {
      last_reject_ = Outcome::Occluded;
      return std::nullopt;
    }
    return candidate;
  }

  CaptureEvent make_event(const GrayImage& image, const imaging::DiffMap& diff, Timestamp at, Trigger trigger) const {
    CaptureEvent ev;
    ev.camera_id = camera_;
    ev.timestamp = at;
    ev.image = image;
    ev.grids = imaging::region_grids(diff, geometry_.aspect_ratio);
    ev.trigger = trigger;
    ev.changed_cell_count = ev.grids.coarse.count_above(cfg_.cell_change_tolerance);
    ev.changed_fraction = diff.changed_fraction;
    return ev;
  }

  void accept(GrayImage image, GrayImage filtered) { reference_ = Reference{std::move(image), std::move(filtered)}; }

  std::string camera_;
  BoardGeometry geometry_;
  CaptureConfig cfg_;
  bool enabled_ = true;
  std::optional<Reference> reference_;
  std::optional<imaging::Rectifier> rectifier_;
  int rect_src_w_ = 0;
  int rect_src_h_ = 0;
  Outcome last_reject_ = Outcome::Unstable;
};

}  // namespace reboard::capture
