#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "reboard/capture/calibrate.hpp"
#include "reboard/detector/pipeline.hpp"
#include "reboard/feedsim/feed.hpp"

namespace reboard::eval {

using detector::Variant;
using feedsim::GroundTruth;

inline constexpr Millis kMatchWindow{15 * 60 * 1000};
inline constexpr double kMillisPerDay = 86'400'000.0;
inline constexpr std::array<Variant, 3> kAllVariants{Variant::Combined, Variant::MotionOnly, Variant::FilteringOnly};

/// An accepted automatic capture, reduced to what scoring needs.
struct Detection {
  Timestamp at{};
  int cols = 0, rows = 0;
  std::vector<bool> changed;  // coarse cells above the cell tolerance, row-major

  bool cell(int c, int r) const { return changed[static_cast<std::size_t>(r) * cols + c]; }
};

struct VariantResult {
  Variant variant = Variant::Combined;
  int matched = 0;
  int total = 0;
  double recall = 0.0;
  int false_positives = 0;
  int detections = 0;
  double observation_days = 0.0;
  int cameras = 1;
  double fp_per_day_per_camera = 0.0;
  int eventually_captured = 0;
  double eventual_recall = 0.0;

  friend bool operator==(const VariantResult&, const VariantResult&) = default;
};

/// Outcome of one-to-one matching between truth and detection times.
struct Matching {
  std::vector<std::optional<std::size_t>> truth_to_detection;
  std::vector<bool> detection_matched;
  int matched = 0;
  int unmatched_detections = 0;
};

/// Greedy earliest-first matching: truth events in time order each take the
/// earliest unused detection within +/- window.
inline Matching match_events(std::span<const Timestamp> truth, std::span<const Timestamp> detections,
                             Millis window = kMatchWindow) {
  Matching m;
  m.truth_to_detection.assign(truth.size(), std::nullopt);
  m.detection_matched.assign(detections.size(), false);
  std::vector<std::size_t> t_order(truth.size()), d_order(detections.size());
  for (std::size_t i = 0; i < t_order.size(); ++i) t_order[i] = i;
  for (std::size_t i = 0; i < d_order.size(); ++i) d_order[i] = i;
  std::stable_sort(t_order.begin(), t_order.end(), [&](auto a, auto b) { return truth[a] < truth[b]; });
  std::stable_sort(d_order.begin(), d_order.end(), [&](auto a, auto b) { return detections[a] < detections[b]; });
  for (std::size_t ti : t_order) {
    for (std::size_t di : d_order) {
      if (m.detection_matched[di]) continue;
      const Millis gap = detections[di] - truth[ti];
      if (gap < -window) continue;
      if (gap > window) break;
      m.detection_matched[di] = true;
      m.truth_to_detection[ti] = di;
      ++m.matched;
      break;
    }
  }
  m.unmatched_detections = static_cast<int>(std::count(m.detection_matched.begin(), m.detection_matched.end(), false));
  return m;
}

/// Coarse cells overlapped by a normalized board region.
inline std::vector<std::pair<int, int>> region_cells(const feedsim::NormRect& r, int cols, int rows) {
  std::vector<std::pair<int, int>> out;
  const int c0 = std::clamp(static_cast<int>(std::floor(r.x * cols)), 0, cols - 1);
  const int r0 = std::clamp(static_cast<int>(std::floor(r.y * rows)), 0, rows - 1);
  const int c1 = std::clamp(static_cast<int>(std::ceil((r.x + r.w) * cols)) - 1, c0, cols - 1);
  const int r1 = std::clamp(static_cast<int>(std::ceil((r.y + r.h) * rows)) - 1, r0, rows - 1);
  for (int y = r0; y <= r1; ++y)
    for (int x = c0; x <= c1; ++x) out.emplace_back(x, y);
  return out;
}

inline bool redacted(const GroundTruth& gt, Timestamp t) {
  return std::any_of(gt.redactions.begin(), gt.redactions.end(), [&](const auto& s) { return s.contains(t); });
}

inline double observation_days(const GroundTruth& gt) {
  double ms = static_cast<double>((gt.end - gt.start).count());
  for (const auto& r : gt.redactions) {
    const auto s = std::max(r.start, gt.start), e = std::min(r.end, gt.end);
    if (s < e) ms -= static_cast<double>((e - s).count());
  }
  return std::max(0.0, ms) / kMillisPerDay;
}

inline void finalize_rates(VariantResult& r) {
  r.recall = r.total ? double(r.matched) / r.total : 1.0;
  r.eventual_recall = r.total ? double(r.eventually_captured) / r.total : 1.0;
  const double camera_days = r.observation_days * r.cameras;
  r.fp_per_day_per_camera = camera_days > 0 ? r.false_positives / camera_days : 0.0;
}

/// Scores one variant's detections against the truth for a single camera.
inline VariantResult score(Variant variant, std::span<const Detection> detections, const GroundTruth& gt,
                           Millis window = kMatchWindow) {
  std::vector<const feedsim::TruthEvent*> events;
  for (const auto& e : gt.events)
    if (!redacted(gt, e.at)) events.push_back(&e);
  std::vector<const Detection*> dets;
  for (const auto& d : detections)
    if (!redacted(gt, d.at)) dets.push_back(&d);

  std::vector<Timestamp> tt, dt;
  for (auto* e : events) tt.push_back(e->at);
  for (auto* d : dets) dt.push_back(d->at);
  const Matching m = match_events(tt, dt, window);

  VariantResult r;
  r.variant = variant;
  r.total = static_cast<int>(events.size());
  r.matched = m.matched;
  r.detections = static_cast<int>(dets.size());
  r.false_positives = m.unmatched_detections;
  r.observation_days = observation_days(gt);
  for (std::size_t i = 0; i < events.size(); ++i) {
    bool seen = m.truth_to_detection[i].has_value();
    for (std::size_t k = 0; !seen && k < dets.size(); ++k) {
      const Detection& d = *dets[k];
      if (d.at < events[i]->at || d.cols == 0) continue;
      for (auto [c, rr] : region_cells(events[i]->region, d.cols, d.rows)) {
        if (d.cell(c, rr)) {
          seen = true;
          break;
        }
      }
    }
    r.eventually_captured += seen;
  }
  finalize_rates(r);
  return r;
}

/// Sums counts and camera-days over several runs of the same variant.
inline VariantResult aggregate(std::span<const VariantResult> runs) {
  if (runs.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to aggregate");
  VariantResult out;
  out.variant = runs.front().variant;
  double camera_days = 0.0;
  for (const auto& r : runs) {
    if (r.variant != out.variant) throw Error(ErrorCode::InvalidArgument, "cannot aggregate different variants");
    out.matched += r.matched;
    out.total += r.total;
    out.false_positives += r.false_positives;
    out.detections += r.detections;
    out.eventually_captured += r.eventually_captured;
    camera_days += r.observation_days * r.cameras;
  }
  out.cameras = 1;
  out.observation_days = camera_days;
  finalize_rates(out);
  return out;
}

// Feeds ----------------------------------------------------------------------

using feedsim::FrameFeed;
using feedsim::ManifestFeed;
using feedsim::ScenarioFeed;

struct RunOutput {
  std::vector<VariantResult> results;
  std::vector<std::vector<Detection>> detections;  // per variant, in run order
  std::vector<collab::CollaborationInterval> intervals;
};

/// Replays a feed once through a shared motion stream with one capture lane
/// per variant, then scores each lane.
inline RunOutput run_variants(FrameFeed& feed, const GroundTruth& gt, std::span<const Variant> variants,
                              const detector::CameraSettings& settings, Millis window = kMatchWindow) {
  if (variants.empty()) throw Error(ErrorCode::InvalidArgument, "no variants requested");
  if (settings.camera_id != gt.camera_id) {
    throw Error(ErrorCode::MismatchedSources,
                "feed camera '" + settings.camera_id + "' does not match truth camera '" + gt.camera_id + "'");
  }
  detector::CameraPipeline pipeline(settings, std::vector<Variant>(variants.begin(), variants.end()));
  RunOutput out;
  out.detections.resize(variants.size());
  std::optional<Timestamp> first, last;
  while (auto frame = feed.next()) {
    if (!first) first = frame->timestamp;
    last = frame->timestamp;
    auto step = pipeline.process(*frame, feed.bursts());
    for (auto& iv : step.intervals) out.intervals.push_back(std::move(iv));
    for (const auto& c : step.captures) {
      Detection d;
      d.at = c.event.timestamp;
      d.cols = c.event.grids.coarse.cols;
      d.rows = c.event.grids.coarse.rows;
      d.changed.resize(c.event.grids.coarse.fraction.size());
      for (std::size_t i = 0; i < d.changed.size(); ++i) {
        d.changed[i] = c.event.grids.coarse.fraction[i] > settings.capture.cell_change_tolerance;
      }
      out.detections[c.lane].push_back(std::move(d));
    }
  }
  if (!first || *last < gt.start || *first > gt.end) {
    throw Error(ErrorCode::MismatchedSources, "feed time range does not overlap the ground truth");
  }
  for (auto& iv : pipeline.finish(*last)) out.intervals.push_back(std::move(iv));
  for (std::size_t i = 0; i < variants.size(); ++i) out.results.push_back(score(variants[i], out.detections[i], gt, window));
  return out;
}

inline VariantResult run_variant(FrameFeed& feed, const GroundTruth& gt, Variant variant,
                                 const detector::CameraSettings& settings) {
  const std::array<Variant, 1> one{variant};
  return run_variants(feed, gt, one, settings).results.front();
}

/// Camera settings for a board of the given geometry and working resolution,
/// with t calibrated for a 1/100-area mark at `mark_contrast`.
inline detector::CameraSettings calibrated_settings(const std::string& camera_id, const imaging::BoardGeometry& geometry,
                                                    int out_height, capture::CalibrationScene scene,
                                                    int mark_contrast = 100) {
  detector::CameraSettings s;
  s.camera_id = camera_id;
  s.geometry = geometry;
  s.capture.out_height = out_height;
  const long long area = static_cast<long long>(imaging::rectified_width(geometry.aspect_ratio, out_height)) *
                         out_height;
  scene.aspect_ratio = geometry.aspect_ratio;
  s.capture.change_threshold = capture::calibrate_threshold(area, mark_contrast, s.capture, scene).threshold;
  return s;
}

inline detector::CameraSettings settings_for(const feedsim::Scenario& sc, int mark_contrast = 100) {
  capture::CalibrationScene scene;
  scene.board_luma = sc.board_luma;
  scene.noise_amplitude = sc.noise;
  return calibrated_settings(sc.camera_id, sc.geometry, sc.out_height, scene, mark_contrast);
}

/// For recorded feeds: the truth file must carry the board geometry.
inline detector::CameraSettings settings_for(const GroundTruth& gt, int mark_contrast = 100,
                                             capture::CalibrationScene scene = {}) {
  if (!gt.geometry || gt.out_height <= 0) {
    throw Error(ErrorCode::InvalidArgument, "truth for camera " + gt.camera_id + " carries no board geometry");
  }
  return calibrated_settings(gt.camera_id, *gt.geometry, gt.out_height, scene, mark_contrast);
}

/// A burst read from a recording must span distinct logged frames, or the
/// burst-agreement check compares a frame with itself.
inline void fit_bursts_to_recording(detector::CameraSettings& s, int fps) {
  if (fps <= 0) throw Error(ErrorCode::InvalidArgument, "recording fps must be positive");
  s.capture.burst_spacing = std::max(s.capture.burst_spacing, Millis{(1000 + fps - 1) / fps});
}

// Reporting ------------------------------------------------------------------

struct PaperFigures {
  double recall;
  double fp_per_day_per_camera;
};

/// Field results from the original deployment, shown for qualitative comparison.
inline PaperFigures paper_reference(Variant v) {
  switch (v) {
    case Variant::Combined: return {0.69, 1.05};
    case Variant::MotionOnly: return {0.64, 1.17};
    case Variant::FilteringOnly: return {0.60, 6.97};
  }
  return {0, 0};
}

inline std::vector<VariantResult> ordered(std::vector<VariantResult> results) {
  std::stable_sort(results.begin(), results.end(),
                   [](const auto& a, const auto& b) { return static_cast<int>(a.variant) < static_cast<int>(b.variant); });
  return results;
}

/// FP(filtering_only) exceeds both FP(combined) and FP(motion_only).
inline std::optional<bool> variant_ordering_holds(std::span<const VariantResult> results) {
  const VariantResult *c = nullptr, *m = nullptr, *f = nullptr;
  for (const auto& r : results) {
    if (r.variant == Variant::Combined) c = &r;
    if (r.variant == Variant::MotionOnly) m = &r;
    if (r.variant == Variant::FilteringOnly) f = &r;
  }
  if (!c || !m || !f) return std::nullopt;
  return f->fp_per_day_per_camera > c->fp_per_day_per_camera && f->fp_per_day_per_camera > m->fp_per_day_per_camera;
}

inline std::string report_table(std::span<const VariantResult> results) {
  if (results.empty()) throw Error(ErrorCode::InvalidArgument, "report needs at least one result");
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-15s %8s %9s %5s %10s %9s  %12s %14s\n", "variant", "recall", "matched",
                "FP", "FP/day/cam", "eventual", "paper recall", "paper FP/d/cam");
  out << line;
  for (const auto& r : ordered({results.begin(), results.end()})) {
    const auto p = paper_reference(r.variant);
    const std::string matched = std::to_string(r.matched) + "/" + std::to_string(r.total);
    std::snprintf(line, sizeof line, "%-15s %8.3f %9s %5d %10.2f %9.3f  %12.2f %14.2f\n",
                  std::string(detector::to_string(r.variant)).c_str(), r.recall, matched.c_str(), r.false_positives,
                  r.fp_per_day_per_camera, r.eventual_recall, p.recall, p.fp_per_day_per_camera);
    out << line;
  }
  return out.str();
}

inline nlohmann::json to_json(const VariantResult& r) {
  const auto p = paper_reference(r.variant);
  return {{"variant", detector::to_string(r.variant)},
          {"matched", r.matched},
          {"total", r.total},
          {"recall", r.recall},
          {"false_positives", r.false_positives},
          {"detections", r.detections},
          {"observation_days", r.observation_days},
          {"cameras", r.cameras},
          {"fp_per_day_per_camera", r.fp_per_day_per_camera},
          {"eventually_captured", r.eventually_captured},
          {"eventual_recall", r.eventual_recall},
          {"paper", {{"recall", p.recall}, {"fp_per_day_per_camera", p.fp_per_day_per_camera}}}};
}

inline VariantResult result_from_json(const nlohmann::json& j) {
  VariantResult r;
  r.variant = detector::parse_variant(j.at("variant").get<std::string>());
  r.matched = j.at("matched").get<int>();
  r.total = j.at("total").get<int>();
  r.recall = j.at("recall").get<double>();
  r.false_positives = j.at("false_positives").get<int>();
  r.detections = j.at("detections").get<int>();
  r.observation_days = j.at("observation_days").get<double>();
  r.cameras = j.at("cameras").get<int>();
  r.fp_per_day_per_camera = j.at("fp_per_day_per_camera").get<double>();
  r.eventually_captured = j.at("eventually_captured").get<int>();
  r.eventual_recall = j.at("eventual_recall").get<double>();
  return r;
}

inline nlohmann::json report_json(std::span<const VariantResult> results) {
  nlohmann::json j;
  j["results"] = nlohmann::json::array();
  for (const auto& r : ordered({results.begin(), results.end()})) j["results"].push_back(to_json(r));
  if (const auto ok = variant_ordering_holds(results)) j["variant_ordering_holds"] = *ok;
  return j;
}

inline std::vector<VariantResult> results_from_json(const nlohmann::json& j) {
  std::vector<VariantResult> out;
  for (const auto& r : j.at("results")) out.push_back(result_from_json(r));
  return out;
}

}  // namespace reboard::eval
