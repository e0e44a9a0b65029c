#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "reboard/imaging/geometry.hpp"
#include "reboard/motion/motion.hpp"

namespace reboard::feedsim {

/// Rectangle in normalized board coordinates, [0,1] on both axes.
struct NormRect {
  double x = 0, y = 0, w = 0, h = 0;
  friend bool operator==(const NormRect&, const NormRect&) = default;
};

struct StrokeEvent {
  Millis at{};
  NormRect region;
  int contrast = 140;
  int segments = 4;  // polyline vertices minus one
  int width = 2;     // brush size in rectified pixels
};

struct EraseEvent {
  Millis at{};
  NormRect region;
};

/// Person-sized textured rectangle moving from x to `to` over its span,
/// swaying by +/- sway pixels.
struct WalkerEvent {
  Millis start{}, end{};
  double x = 0, to = 0;
  int y = 0, w = 0, h = 0;
  int sway = 8;
};

enum class LightShape { Ramp, Pulse, Flicker };

struct LightingEvent {
  Millis start{}, end{};
  int delta = 0;
  LightShape shape = LightShape::Pulse;
  Millis rise{30'000};   // pulse edge duration
  Millis period{300};    // flicker half-period
};

struct OccluderEvent {
  Millis start{}, end{};
  imaging::Rect rect;
  int luma = 70;
};

struct RedactSpan {
  Millis start{}, end{};
};

/// Scripted synthetic camera feed. Times are offsets from `start`.
struct Scenario {
  std::string name = "scenario";
  std::string camera_id = "cam-1";
  Timestamp start = from_epoch_ms(1'772'442'000'000);  // 2026-03-02 09:00 UTC
  Millis duration{3'600'000};
  int fps = 1;
  std::uint64_t seed = 1;
  int frame_width = 320;
  int frame_height = 240;
  imaging::BoardGeometry geometry{{imaging::Point{24, 20}, imaging::Point{296, 22}, imaging::Point{294, 214},
                                   imaging::Point{26, 212}},
                                  1.6};
  int out_height = 160;
  int board_luma = 200;
  int backdrop_luma = 90;
  int noise = 2;

  std::vector<StrokeEvent> strokes;
  std::vector<EraseEvent> erases;
  std::vector<WalkerEvent> walkers;
  std::vector<LightingEvent> lighting;
  std::vector<OccluderEvent> occluders;
  std::vector<RedactSpan> redactions;

  Timestamp end() const { return start + duration; }

  void validate() const;
};

namespace detail {

[[noreturn]] inline void script_error(int line, const std::string& what) {
  throw Error(ErrorCode::InvalidScript,
              (line > 0 ? "scenario line " + std::to_string(line) + ": " : std::string("scenario: ")) + what);
}

inline double to_double(std::string_view s, int line, std::string_view key) {
  const std::string v(s);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d)) return d;
  } catch (const std::logic_error&) {
  }
  script_error(line, "bad number for '" + std::string(key) + "': '" + v + "'");
}

inline int to_int(std::string_view s, int line, std::string_view key) {
  const double d = to_double(s, line, key);
  if (d != std::floor(d) || std::abs(d) > 1e9) script_error(line, "'" + std::string(key) + "' must be an integer");
  return static_cast<int>(d);
}

inline Millis seconds(std::string_view s, int line, std::string_view key) {
  return Millis{std::llround(to_double(s, line, key) * 1000.0)};
}

inline std::vector<double> numbers(std::string_view s, char sep, int line, std::string_view key) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto next = s.find(sep, pos);
    const auto part = s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    out.push_back(to_double(part, line, key));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::string_view trim_view(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

/// key=value arguments of an event line, each consumed at most once.
class Args {
 public:
  Args(const std::vector<std::string_view>& tokens, std::size_t first, int line) : line_(line) {
    for (std::size_t i = first; i < tokens.size(); ++i) {
      const auto eq = tokens[i].find('=');
      if (eq == std::string_view::npos || eq == 0) script_error(line, "expected key=value, got '" + std::string(tokens[i]) + "'");
      if (!kv_.emplace(std::string(tokens[i].substr(0, eq)), std::string(tokens[i].substr(eq + 1))).second) {
        script_error(line, "duplicate key '" + std::string(tokens[i].substr(0, eq)) + "'");
      }
    }
  }
  bool has(const std::string& k) const { return kv_.count(k) > 0; }
  std::string_view get(const std::string& k) {
    const auto it = kv_.find(k);
    if (it == kv_.end()) script_error(line_, "missing '" + k + "'");
    used_.push_back(k);
    return it->second;
  }
  Millis time(const std::string& k) { return seconds(get(k), line_, k); }
  int integer(const std::string& k, int fallback) { return has(k) ? to_int(get(k), line_, k) : fallback; }
  double real(const std::string& k) { return to_double(get(k), line_, k); }
  NormRect norm_rect(const std::string& k) {
    const auto v = numbers(get(k), ',', line_, k);
    if (v.size() != 4) script_error(line_, "'" + k + "' needs x,y,w,h");
    return {v[0], v[1], v[2], v[3]};
  }
  void finish() const {
    for (const auto& [k, v] : kv_) {
      if (std::find(used_.begin(), used_.end(), k) == used_.end()) script_error(line_, "unknown key '" + k + "'");
    }
  }

 private:
  std::map<std::string, std::string> kv_;
  std::vector<std::string> used_;
  int line_;
};

inline bool norm_rect_valid(const NormRect& r) {
  return r.w > 0 && r.h > 0 && r.x >= 0 && r.y >= 0 && r.x + r.w <= 1.0 + 1e-9 && r.y + r.h <= 1.0 + 1e-9;
}

}  // namespace detail

inline void Scenario::validate() const {
  using detail::script_error;
  if (duration <= Millis::zero()) script_error(0, "duration must be positive");
  if (fps < 1 || fps > 30) script_error(0, "fps must lie in [1,30]");
  if (frame_width < 16 || frame_height < 16) script_error(0, "frame too small");
  if (out_height < 100) script_error(0, "out_height must be at least 100");
  if (noise < 0 || noise > 50) script_error(0, "noise must lie in [0,50]");
  try {
    imaging::validate_geometry(geometry);
  } catch (const Error& e) {
    script_error(0, e.what());
  }
  for (const auto& c : geometry.corners) {
    if (c.x < 0 || c.y < 0 || c.x > frame_width - 1 || c.y > frame_height - 1) {
      script_error(0, "board corners must lie inside the frame");
    }
  }
  auto within = [&](Millis t) { return t >= Millis::zero() && t <= duration; };
  auto span = [&](Millis s, Millis e, const char* what) {
    if (!within(s) || !within(e) || !(s < e)) script_error(0, std::string(what) + " span must lie inside the duration");
  };
  for (const auto& s : strokes) {
    if (!within(s.at)) script_error(0, "stroke outside the duration");
    if (!detail::norm_rect_valid(s.region)) script_error(0, "stroke region must lie inside the board");
    if (s.contrast < 1 || s.contrast > 255 || s.segments < 1 || s.width < 1) script_error(0, "bad stroke parameters");
  }
  for (const auto& e : erases) {
    if (!within(e.at)) script_error(0, "erase outside the duration");
    if (!detail::norm_rect_valid(e.region)) script_error(0, "erase region must lie inside the board");
  }
  const motion::MotionConfig person;  // detector defaults define a plausible person
  const double frame_area = double(frame_width) * frame_height;
  for (const auto& w : walkers) {
    span(w.start, w.end, "walker");
    if (w.w <= 0 || w.h <= 0 || w.sway < 0) script_error(0, "walker size must be positive");
    const double lo = std::min(w.x, w.to) - w.sway, hi = std::max(w.x, w.to) + w.sway + w.w;
    if (lo < 0 || hi > frame_width || w.y < 0 || w.y + w.h > frame_height) script_error(0, "walker leaves the frame");
    const double envelope = double(w.w + 2 * w.sway) * w.h / frame_area;
    if (double(w.w) * w.h / frame_area < person.min_blob_area || envelope > person.max_blob_area) {
      script_error(0, "walker size outside the person band");
    }
  }
  for (const auto& l : lighting) {
    span(l.start, l.end, "lighting");
    if (l.delta == 0 || std::abs(l.delta) > 200) script_error(0, "lighting delta must be non-zero and within 200");
    if (l.rise <= Millis::zero() || l.period <= Millis::zero()) script_error(0, "lighting rise/period must be positive");
  }
  for (const auto& o : occluders) {
    span(o.start, o.end, "occluder");
    if (o.rect.empty() || o.rect.x < 0 || o.rect.y < 0 || o.rect.right() > frame_width ||
        o.rect.bottom() > frame_height) {
      script_error(0, "occluder must lie inside the frame");
    }
  }
  for (const auto& r : redactions) span(r.start, r.end, "redaction");
}

inline LightShape parse_light_shape(std::string_view s, int line) {
  if (s == "ramp") return LightShape::Ramp;
  if (s == "pulse") return LightShape::Pulse;
  if (s == "flicker") return LightShape::Flicker;
  detail::script_error(line, "unknown lighting shape '" + std::string(s) + "'");
}

inline std::string_view to_string(LightShape s) {
  switch (s) {
    case LightShape::Ramp: return "ramp";
    case LightShape::Pulse: return "pulse";
    case LightShape::Flicker: return "flicker";
  }
  return "?";
}

/// Parses the scenario script format (see README): `key = value` settings,
/// `event <kind> k=v ...` lines and `redact start=<s> end=<s>` lines.
/// Times are seconds from the scenario start.
inline Scenario parse_scenario(std::string_view text) {
  using namespace detail;
  Scenario sc;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = raw;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    const auto tokens = split_ws(s);
    if (tokens.empty()) continue;
    if (tokens[0] == "event") {
      if (tokens.size() < 2) script_error(line, "event kind missing");
      Args a(tokens, 2, line);
      const auto kind = tokens[1];
      if (kind == "stroke") {
        StrokeEvent e;
        e.at = a.time("at");
        e.region = a.norm_rect("region");
        e.contrast = a.integer("contrast", e.contrast);
        e.segments = a.integer("segments", e.segments);
        e.width = a.integer("width", e.width);
        sc.strokes.push_back(e);
      } else if (kind == "erase") {
        EraseEvent e;
        e.at = a.time("at");
        e.region = a.norm_rect("region");
        sc.erases.push_back(e);
      } else if (kind == "walker") {
        WalkerEvent e;
        e.start = a.time("start");
        e.end = a.time("end");
        e.x = a.real("x");
        e.to = a.has("to") ? a.real("to") : e.x;
        e.y = a.integer("y", 0);
        e.w = a.integer("w", 0);
        e.h = a.integer("h", 0);
        e.sway = a.integer("sway", e.sway);
        sc.walkers.push_back(e);
      } else if (kind == "lighting") {
        LightingEvent e;
        e.start = a.time("start");
        e.end = a.time("end");
        e.delta = a.integer("delta", 0);
        if (a.has("shape")) e.shape = parse_light_shape(a.get("shape"), line);
        if (a.has("rise")) e.rise = a.time("rise");
        if (a.has("period")) e.period = a.time("period");
        sc.lighting.push_back(e);
      } else if (kind == "occluder") {
        OccluderEvent e;
        e.start = a.time("start");
        e.end = a.time("end");
        const auto v = numbers(a.get("rect"), ',', line, "rect");
        if (v.size() != 4) script_error(line, "'rect' needs x,y,w,h");
        e.rect = {int(v[0]), int(v[1]), int(v[2]), int(v[3])};
        e.luma = a.integer("luma", e.luma);
        sc.occluders.push_back(e);
      } else {
        script_error(line, "unknown event kind '" + std::string(kind) + "'");
      }
      a.finish();
      continue;
    }
    if (tokens[0] == "redact") {
      Args a(tokens, 1, line);
      sc.redactions.push_back({a.time("start"), a.time("end")});
      a.finish();
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) script_error(line, "expected 'key = value'");
    const std::string key(trim_view(s.substr(0, eq)));
    const std::string_view value = trim_view(s.substr(eq + 1));
    if (value.empty()) script_error(line, "empty value for '" + key + "'");
    if (key == "name") sc.name = value;
    else if (key == "camera") sc.camera_id = value;
    else if (key == "start_ms") sc.start = from_epoch_ms(std::llround(to_double(value, line, key)));
    else if (key == "duration") sc.duration = seconds(value, line, key);
    else if (key == "fps") sc.fps = to_int(value, line, key);
    else if (key == "seed") sc.seed = static_cast<std::uint64_t>(to_double(value, line, key));
    else if (key == "frame") {
      const auto v = numbers(value, 'x', line, key);
      if (v.size() != 2) script_error(line, "frame needs WxH");
      sc.frame_width = int(v[0]);
      sc.frame_height = int(v[1]);
    } else if (key == "corners") {
      const auto pts = split_ws(value);
      if (pts.size() != 4) script_error(line, "corners needs four x,y points");
      for (int i = 0; i < 4; ++i) {
        const auto v = numbers(pts[i], ',', line, key);
        if (v.size() != 2) script_error(line, "corner needs x,y");
        sc.geometry.corners[i] = {v[0], v[1]};
      }
    } else if (key == "aspect") sc.geometry.aspect_ratio = to_double(value, line, key);
    else if (key == "out_height") sc.out_height = to_int(value, line, key);
    else if (key == "board_luma") sc.board_luma = to_int(value, line, key);
    else if (key == "backdrop_luma") sc.backdrop_luma = to_int(value, line, key);
    else if (key == "noise") sc.noise = to_int(value, line, key);
    else script_error(line, "unknown setting '" + key + "'");
  }
  sc.validate();
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open scenario " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace reboard::feedsim
