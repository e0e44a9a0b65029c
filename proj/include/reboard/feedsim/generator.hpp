#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "reboard/capture/frame_source.hpp"
#include "reboard/feedsim/manifest.hpp"
#include "reboard/feedsim/scenario.hpp"
#include "reboard/imaging/color.hpp"
#include "reboard/imaging/geometry.hpp"
#include "reboard/imaging/png_io.hpp"

namespace reboard::feedsim {

struct TruthEvent {
  Timestamp at{};
  NormRect region;  // normalized board coordinates
  bool collaborative = false;
  std::string kind;  // "stroke" or "erase"
  friend bool operator==(const TruthEvent&, const TruthEvent&) = default;
};

struct PresenceStep {
  Timestamp at{};
  int count = 0;  // walkers present from `at` on
  friend bool operator==(const PresenceStep&, const PresenceStep&) = default;
};

struct TimeSpan {
  Timestamp start{}, end{};
  bool contains(Timestamp t) const noexcept { return t >= start && t < end; }
  friend bool operator==(const TimeSpan&, const TimeSpan&) = default;
};

/// Exact labels for a feed: board updates, person presence and redactions.
struct GroundTruth {
  std::string camera_id;
  Timestamp start{}, end{};
  std::vector<TruthEvent> events;
  std::vector<PresenceStep> presence;
  std::vector<TimeSpan> redactions;
  std::optional<imaging::BoardGeometry> geometry;
  int out_height = 0;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

inline int walkers_present(const Scenario& sc, Millis offset) {
  return static_cast<int>(std::count_if(sc.walkers.begin(), sc.walkers.end(),
                                        [&](const WalkerEvent& w) { return offset >= w.start && offset < w.end; }));
}

/// Ground truth follows from the script alone: one event per stroke or
/// erase, collaborative when two or more walkers are present at that moment.
inline GroundTruth derive_truth(const Scenario& sc) {
  GroundTruth gt;
  gt.camera_id = sc.camera_id;
  gt.start = sc.start;
  gt.end = sc.end();
  gt.geometry = sc.geometry;
  gt.out_height = sc.out_height;
  for (const auto& s : sc.strokes) gt.events.push_back({sc.start + s.at, s.region, walkers_present(sc, s.at) >= 2, "stroke"});
  for (const auto& e : sc.erases) gt.events.push_back({sc.start + e.at, e.region, walkers_present(sc, e.at) >= 2, "erase"});
  std::stable_sort(gt.events.begin(), gt.events.end(), [](const auto& a, const auto& b) { return a.at < b.at; });

  std::vector<Millis> changes{Millis::zero()};
  for (const auto& w : sc.walkers) {
    changes.push_back(w.start);
    changes.push_back(w.end);
  }
  std::sort(changes.begin(), changes.end());
  changes.erase(std::unique(changes.begin(), changes.end()), changes.end());
  for (Millis c : changes) {
    const int n = walkers_present(sc, c);
    if (gt.presence.empty() || gt.presence.back().count != n) gt.presence.push_back({sc.start + c, n});
  }
  for (const auto& r : sc.redactions) gt.redactions.push_back({sc.start + r.start, sc.start + r.end});
  return gt;
}

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Triangle wave in [-1, 1] with a 2 s period.
inline double sway_phase(long long ms) {
  const double p = static_cast<double>(((ms % 2000) + 2000) % 2000) / 2000.0;
  return p < 0.5 ? 4.0 * p - 1.0 : 3.0 - 4.0 * p;
}

}  // namespace detail

inline double lighting_offset(const LightingEvent& l, Millis t) {
  switch (l.shape) {
    case LightShape::Ramp:
      if (t < l.start) return 0.0;
      if (t >= l.end) return l.delta;
      return l.delta * double((t - l.start).count()) / double((l.end - l.start).count());
    case LightShape::Pulse: {
      if (t < l.start || t >= l.end) return 0.0;
      const double up = double((t - l.start).count()) / double(l.rise.count());
      const double down = double((l.end - t).count()) / double(l.rise.count());
      return l.delta * std::min({1.0, up, down});
    }
    case LightShape::Flicker:
      if (t < l.start || t >= l.end) return 0.0;
      return ((t - l.start) / l.period) % 2 ? l.delta : 0.0;
  }
  return 0.0;
}

/// Renders scenario frames on demand. Any timestamp can be rendered, so the
/// renderer doubles as the capture detector's burst source.
class SceneRenderer : public capture::FrameSource {
 public:
  explicit SceneRenderer(Scenario sc) : sc_(std::move(sc)) {
    sc_.validate();
    const auto t = imaging::BoardTransform::make(sc_.geometry, sc_.out_height);
    canvas_w_ = t.width;
    canvas_h_ = t.height;
    build_warp(t.to_output);
    for (std::size_t i = 0; i < sc_.strokes.size(); ++i) updates_.push_back({sc_.strokes[i].at, true, i});
    for (std::size_t i = 0; i < sc_.erases.size(); ++i) updates_.push_back({sc_.erases[i].at, false, i});
    std::stable_sort(updates_.begin(), updates_.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
  }

  const Scenario& scenario() const noexcept { return sc_; }
  int canvas_width() const noexcept { return canvas_w_; }
  int canvas_height() const noexcept { return canvas_h_; }

  /// Nominal frame timestamps of the feed.
  std::vector<Timestamp> frame_times() const {
    std::vector<Timestamp> out;
    const Millis step{1000 / sc_.fps};
    for (Millis t{0}; t < sc_.duration; t += step) out.push_back(sc_.start + t);
    return out;
  }

  /// The ideal (noise-free, unoccluded) rectified board content at `at`.
  const imaging::GrayImage& board_canvas(Timestamp at) {
    sync_board(at - sc_.start);
    return canvas_;
  }

  imaging::GrayImage render(Timestamp at) {
    const Millis t = at - sc_.start;
    sync_board(t);
    imaging::GrayImage img = static_frame_;
    for (const auto& o : sc_.occluders) {
      if (t >= o.start && t < o.end) paint(img, o.rect, o.luma);
    }
    for (std::size_t i = 0; i < sc_.walkers.size(); ++i) {
      const auto& w = sc_.walkers[i];
      if (t >= w.start && t < w.end) draw_walker(img, i, t);
    }
    double light = 0.0;
    for (const auto& l : sc_.lighting) light += lighting_offset(l, t);
    const int offset = static_cast<int>(std::lround(light));
    const int span = 2 * sc_.noise + 1;
    const std::uint64_t frame_key = detail::mix64(sc_.seed ^ detail::mix64(static_cast<std::uint64_t>(t.count())));
    auto px = img.data();
    for (std::size_t i = 0; i < px.size(); ++i) {
      const int jitter = sc_.noise ? static_cast<int>(detail::mix64(frame_key + i) % span) - sc_.noise : 0;
      px[i] = static_cast<std::uint8_t>(std::clamp(px[i] + offset + jitter, 0, 255));
    }
    return img;
  }

  imaging::RawFrame grab(Timestamp at) override { return imaging::to_frame(render(at), at); }

  /// Walker rectangle in frame coordinates at scenario offset `t`.
  imaging::Rect walker_rect(const WalkerEvent& w, Millis t) const {
    const double frac = double((t - w.start).count()) / double((w.end - w.start).count());
    const double x = w.x + (w.to - w.x) * std::clamp(frac, 0.0, 1.0) + w.sway * detail::sway_phase(t.count());
    return {static_cast<int>(std::lround(x)), w.y, w.w, w.h};
  }

 private:
  struct Update {
    Millis at;
    bool stroke;
    std::size_t index;
  };
  struct Tap {
    std::int32_t idx = -1;  // top-left canvas sample, -1 outside the board
    float fx = 0, fy = 0;
  };

  void build_warp(const imaging::Homography& frame_to_canvas) {
    warp_.resize(static_cast<std::size_t>(sc_.frame_width) * sc_.frame_height);
    for (int y = 0; y < sc_.frame_height; ++y)
      for (int x = 0; x < sc_.frame_width; ++x) {
        const auto p = frame_to_canvas.apply({double(x), double(y)});
        Tap& tap = warp_[static_cast<std::size_t>(y) * sc_.frame_width + x];
        if (p.x < -0.5 || p.y < -0.5 || p.x > canvas_w_ - 0.5 || p.y > canvas_h_ - 0.5) continue;
        const double cx = std::clamp(p.x, 0.0, double(canvas_w_ - 1)), cy = std::clamp(p.y, 0.0, double(canvas_h_ - 1));
        const int x0 = std::min(static_cast<int>(cx), canvas_w_ - 2), y0 = std::min(static_cast<int>(cy), canvas_h_ - 2);
        tap.idx = y0 * canvas_w_ + x0;
        tap.fx = static_cast<float>(cx - x0);
        tap.fy = static_cast<float>(cy - y0);
      }
  }

  void sync_board(Millis t) {
    const auto applied = static_cast<std::size_t>(std::count_if(updates_.begin(), updates_.end(),
                                                                [&](const Update& u) { return u.at <= t; }));
    if (applied == applied_ && !static_frame_.data().empty()) return;
    applied_ = applied;
    canvas_ = imaging::GrayImage(canvas_w_, canvas_h_, static_cast<std::uint8_t>(std::clamp(sc_.board_luma, 0, 255)));
    for (std::size_t k = 0; k < applied; ++k) {
      const auto& u = updates_[k];
      if (u.stroke) draw_stroke(u.index);
      else erase(sc_.erases[u.index].region);
    }
    static_frame_ = imaging::GrayImage(sc_.frame_width, sc_.frame_height,
                                       static_cast<std::uint8_t>(std::clamp(sc_.backdrop_luma, 0, 255)));
    const auto src = canvas_.data();
    auto dst = static_frame_.data();
    for (std::size_t i = 0; i < warp_.size(); ++i) {
      const Tap& tap = warp_[i];
      if (tap.idx < 0) continue;
      const double a = src[tap.idx], b = src[tap.idx + 1], c = src[tap.idx + canvas_w_], d = src[tap.idx + canvas_w_ + 1];
      const double top = a + (b - a) * tap.fx, bottom = c + (d - c) * tap.fx;
      dst[i] = static_cast<std::uint8_t>(std::lround(top + (bottom - top) * tap.fy));
    }
  }

  imaging::Rect canvas_rect(const NormRect& r) const {
    const int x0 = static_cast<int>(std::floor(r.x * canvas_w_)), y0 = static_cast<int>(std::floor(r.y * canvas_h_));
    const int x1 = static_cast<int>(std::ceil((r.x + r.w) * canvas_w_));
    const int y1 = static_cast<int>(std::ceil((r.y + r.h) * canvas_h_));
    return {x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)};
  }

  /// A random polyline confined to the stroke region, drawn with a square brush.
  void draw_stroke(std::size_t index) {
    const auto& s = sc_.strokes[index];
    const auto box = canvas_rect(s.region);
    std::mt19937_64 rng(detail::mix64(sc_.seed * 1315423911ull + index + 1));
    const double half = s.width / 2.0;
    std::uniform_real_distribution<double> ux(box.x + half, std::max(box.x + half, box.right() - half));
    std::uniform_real_distribution<double> uy(box.y + half, std::max(box.y + half, box.bottom() - half));
    const int luma = std::clamp(sc_.board_luma - s.contrast, 0, 255);
    double px = ux(rng), py = uy(rng);
    for (int seg = 0; seg < s.segments; ++seg) {
      const double qx = ux(rng), qy = uy(rng);
      const int steps = std::max(1, static_cast<int>(std::ceil(2.0 * std::hypot(qx - px, qy - py))));
      for (int k = 0; k <= steps; ++k) {
        const double x = px + (qx - px) * k / steps, y = py + (qy - py) * k / steps;
        const int bx = static_cast<int>(std::floor(x - half + 0.5)), by = static_cast<int>(std::floor(y - half + 0.5));
        imaging::Rect brush{bx, by, s.width, s.width};
        brush = clip(brush, box);
        paint(canvas_, brush, luma);
      }
      px = qx;
      py = qy;
    }
  }

  void erase(const NormRect& r) { paint(canvas_, canvas_rect(r), std::clamp(sc_.board_luma, 0, 255)); }

  static imaging::Rect clip(imaging::Rect r, const imaging::Rect& to) {
    const int x0 = std::max(r.x, to.x), y0 = std::max(r.y, to.y);
    const int x1 = std::min(r.right(), to.right()), y1 = std::min(r.bottom(), to.bottom());
    return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
  }

  static void paint(imaging::GrayImage& img, imaging::Rect r, int v) {
    for (int y = std::max(0, r.y); y < std::min(img.height(), r.bottom()); ++y)
      for (int x = std::max(0, r.x); x < std::min(img.width(), r.right()); ++x) img(x, y) = static_cast<std::uint8_t>(v);
  }

  /// Textured rectangle; the texture changes every 100 ms like a moving body.
  void draw_walker(imaging::GrayImage& img, std::size_t index, Millis t) const {
    const auto r = walker_rect(sc_.walkers[index], t);
    const std::uint64_t key = detail::mix64(sc_.seed ^ ((index + 1) << 40) ^ static_cast<std::uint64_t>(t.count() / 100));
    for (int y = std::max(0, r.y); y < std::min(img.height(), r.bottom()); ++y)
      for (int x = std::max(0, r.x); x < std::min(img.width(), r.right()); ++x) {
        const auto h = detail::mix64(key + static_cast<std::uint64_t>((y - r.y) * 4096 + (x - r.x)));
        img(x, y) = static_cast<std::uint8_t>(20 + h % 140);
      }
  }

  Scenario sc_;
  int canvas_w_ = 0, canvas_h_ = 0;
  std::vector<Tap> warp_;
  std::vector<Update> updates_;
  std::size_t applied_ = static_cast<std::size_t>(-1);
  imaging::GrayImage canvas_;
  imaging::GrayImage static_frame_;
};

/// Generator output: a renderer for the frame stream plus exact labels.
struct GeneratedFeed {
  SceneRenderer renderer;
  GroundTruth truth;
};

inline GeneratedFeed generate(const Scenario& sc) { return {SceneRenderer(sc), derive_truth(sc)}; }

// JSON encoding of ground truth ------------------------------------------------

inline nlohmann::json geometry_to_json(const imaging::BoardGeometry& g) {
  nlohmann::json corners = nlohmann::json::array();
  for (const auto& c : g.corners) corners.push_back({c.x, c.y});
  return {{"corners", corners}, {"aspect_ratio", g.aspect_ratio}};
}

inline imaging::BoardGeometry geometry_from_json(const nlohmann::json& j) {
  imaging::BoardGeometry g;
  const auto& c = j.at("corners");
  if (!c.is_array() || c.size() != 4) throw Error(ErrorCode::InvalidArgument, "geometry needs four corners");
  for (int i = 0; i < 4; ++i) g.corners[i] = {c[i].at(0).get<double>(), c[i].at(1).get<double>()};
  g.aspect_ratio = j.at("aspect_ratio").get<double>();
  return g;
}

inline nlohmann::json truth_to_json(const GroundTruth& gt) {
  nlohmann::json j;
  j["camera_id"] = gt.camera_id;
  j["start_ms"] = to_epoch_ms(gt.start);
  j["end_ms"] = to_epoch_ms(gt.end);
  j["events"] = nlohmann::json::array();
  for (const auto& e : gt.events) {
    j["events"].push_back({{"t_ms", to_epoch_ms(e.at)},
                           {"region", {e.region.x, e.region.y, e.region.w, e.region.h}},
                           {"collaborative", e.collaborative},
                           {"kind", e.kind}});
  }
  j["presence"] = nlohmann::json::array();
  for (const auto& p : gt.presence) j["presence"].push_back({{"t_ms", to_epoch_ms(p.at)}, {"count", p.count}});
  j["redactions"] = nlohmann::json::array();
  for (const auto& r : gt.redactions) j["redactions"].push_back({{"start_ms", to_epoch_ms(r.start)}, {"end_ms", to_epoch_ms(r.end)}});
  if (gt.geometry) {
    j["geometry"] = geometry_to_json(*gt.geometry);
    j["out_height"] = gt.out_height;
  }
  return j;
}

inline GroundTruth truth_from_json(const nlohmann::json& j) {
  try {
    GroundTruth gt;
    gt.camera_id = j.at("camera_id").get<std::string>();
    gt.start = from_epoch_ms(j.at("start_ms").get<std::int64_t>());
    gt.end = from_epoch_ms(j.at("end_ms").get<std::int64_t>());
    for (const auto& e : j.value("events", nlohmann::json::array())) {
      const auto& r = e.at("region");
      gt.events.push_back({from_epoch_ms(e.at("t_ms").get<std::int64_t>()),
                           {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>()},
                           e.value("collaborative", false),
                           e.value("kind", std::string("stroke"))});
    }
    for (const auto& p : j.value("presence", nlohmann::json::array())) {
      gt.presence.push_back({from_epoch_ms(p.at("t_ms").get<std::int64_t>()), p.at("count").get<int>()});
    }
    for (const auto& r : j.value("redactions", nlohmann::json::array())) {
      gt.redactions.push_back({from_epoch_ms(r.at("start_ms").get<std::int64_t>()),
                               from_epoch_ms(r.at("end_ms").get<std::int64_t>())});
    }
    if (j.contains("geometry")) {
      gt.geometry = geometry_from_json(j.at("geometry"));
      gt.out_height = j.value("out_height", 480);
    }
    if (!(gt.start < gt.end)) throw Error(ErrorCode::InvalidArgument, "truth start must precede end");
    return gt;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed truth file: ") + e.what());
  }
}

inline GroundTruth load_truth(const fs::path& path) {
  const auto bytes = imaging::read_file_bytes(path);
  try {
    return truth_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, "truth file " + path.string() + " is not JSON: " + e.what());
  }
}

/// Writes frames/NNNNNN.png, manifest.txt and truth.json under `dir`.
/// `progress` is called with (frames written, total).
inline FrameManifest write_feed(const Scenario& sc, const fs::path& dir,
                                const std::function<void(std::size_t, std::size_t)>& progress = {}) {
  SceneRenderer renderer(sc);
  fs::create_directories(dir / "frames");
  FrameManifest m;
  m.fps = sc.fps;
  m.base_dir = dir;
  const auto times = renderer.frame_times();
  for (std::size_t i = 0; i < times.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frames/%06zu.png", i);
    imaging::write_png(dir / name, renderer.render(times[i]));
    m.entries.push_back({name, times[i]});
    if (progress) progress(i + 1, times.size());
  }
  imaging::write_file_bytes(dir / "manifest.txt", [&] {
    const auto s = format_manifest(m);
    return std::vector<std::uint8_t>(s.begin(), s.end());
  }());
  const auto truth = truth_to_json(derive_truth(sc)).dump(2);
  imaging::write_file_bytes(dir / "truth.json", std::vector<std::uint8_t>(truth.begin(), truth.end()));
  return m;
}

}  // namespace reboard::feedsim
