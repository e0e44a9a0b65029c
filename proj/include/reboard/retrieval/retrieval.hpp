#pragma once

#include <charconv>
#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "reboard/coordinator/service.hpp"

namespace reboard::retrieval {

using coordinator::BoardRegion;
using coordinator::CellRect;
using coordinator::RecordId;
using coordinator::RecordPtr;

/// The one set of retrieval parameters shared by every view.
struct FilterContext {
  std::string user;
  std::set<std::string> cameras;
  std::optional<Timestamp> from;  // inclusive
  std::optional<Timestamp> to;    // exclusive
  unsigned types = 0;             // coordinator::TypeMask bits, 0 = all
  std::string keyword;
  std::optional<BoardRegion> region;
  std::optional<CellRect> cells;  // heatmap selection the region came from

  coordinator::CaptureFilter filter() const { return {cameras, from, to, types, keyword, region}; }

  friend bool operator==(const FilterContext&, const FilterContext&) = default;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::MalformedFilter, std::string("bad ") + what + " '" + s + "'");
  }
  return v;
}

inline std::string percent_encode(const std::string& s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out;
}

}  // namespace detail

inline std::string types_to_string(unsigned types) {
  std::string out;
  auto add = [&](unsigned bit, const char* name) {
    if (!(types & bit)) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(coordinator::kPersonal, "personal");
  add(coordinator::kCollaborative, "collaborative");
  add(coordinator::kShared, "shared");
  return out;
}

inline unsigned parse_types(const std::string& s) {
  unsigned mask = 0;
  if (s.empty()) return mask;
  for (const auto& t : detail::split(s, ',')) {
    if (t == "personal") {
      mask |= coordinator::kPersonal;
    } else if (t == "collaborative") {
      mask |= coordinator::kCollaborative;
    } else if (t == "shared") {
      mask |= coordinator::kShared;
    } else {
      throw Error(ErrorCode::MalformedFilter, "unknown content type '" + t + "'");
    }
  }
  return mask;
}

/// Decoded query parameters, as a web framework hands them over.
using Params = std::multimap<std::string, std::string>;

/// Canonical query string for a context (without the user, which travels in
/// the X-User header). Parameters appear in a fixed order and only when set, so
/// equal contexts serialise to identical strings.
inline std::string to_query(const FilterContext& ctx) {
  std::vector<std::pair<std::string, std::string>> kv;
  if (!ctx.cameras.empty()) {
    std::string v;
    for (const auto& c : ctx.cameras) v += (v.empty() ? "" : ",") + c;
    kv.emplace_back("cameras", v);
  }
  if (ctx.from) kv.emplace_back("from", std::to_string(to_epoch_ms(*ctx.from)));
  if (ctx.to) kv.emplace_back("to", std::to_string(to_epoch_ms(*ctx.to)));
  if (ctx.types) kv.emplace_back("types", types_to_string(ctx.types));
  if (!ctx.keyword.empty()) kv.emplace_back("q", ctx.keyword);
  if (ctx.region) {
    const auto& r = *ctx.region;
    kv.emplace_back("region", detail::fmt_double(r.x0) + "," + detail::fmt_double(r.y0) + "," +
                                  detail::fmt_double(r.x1) + "," + detail::fmt_double(r.y1));
  }
  if (ctx.cells) {
    const auto& c = *ctx.cells;
    kv.emplace_back("cells", std::to_string(c.c0) + "," + std::to_string(c.r0) + "," + std::to_string(c.c1) + "," +
                                 std::to_string(c.r1));
  }
  std::string out;
  for (const auto& [k, v] : kv) out += (out.empty() ? "" : "&") + k + "=" + detail::percent_encode(v);
  return out;
}

/// Parses the context parameters; keys belonging to a particular view (such as
/// the calendar's month span) are ignored.
inline FilterContext from_params(const Params& params, std::string user) {
  FilterContext ctx;
  ctx.user = std::move(user);
  std::set<std::string> seen;
  for (const auto& [k, v] : params) {
    if (!seen.insert(k).second &&
        (k == "cameras" || k == "from" || k == "to" || k == "types" || k == "q" || k == "region" || k == "cells")) {
      throw Error(ErrorCode::MalformedFilter, "repeated parameter " + k);
    }
    if (k == "cameras") {
      for (const auto& c : detail::split(v, ','))
        if (!c.empty()) ctx.cameras.insert(c);
    } else if (k == "from") {
      ctx.from = from_epoch_ms(detail::parse_number<std::int64_t>(v, "from"));
    } else if (k == "to") {
      ctx.to = from_epoch_ms(detail::parse_number<std::int64_t>(v, "to"));
    } else if (k == "types") {
      ctx.types = parse_types(v);
    } else if (k == "q") {
      ctx.keyword = v;
    } else if (k == "region") {
      const auto parts = detail::split(v, ',');
      if (parts.size() != 4) throw Error(ErrorCode::MalformedFilter, "region needs x0,y0,x1,y1");
      BoardRegion r{detail::parse_number<double>(parts[0], "region"), detail::parse_number<double>(parts[1], "region"),
                    detail::parse_number<double>(parts[2], "region"), detail::parse_number<double>(parts[3], "region")};
      r.validate();
      ctx.region = r;
    } else if (k == "cells") {
      const auto parts = detail::split(v, ',');
      if (parts.size() != 4) throw Error(ErrorCode::MalformedFilter, "cells needs c0,r0,c1,r1");
      ctx.cells = CellRect{detail::parse_number<int>(parts[0], "cells"), detail::parse_number<int>(parts[1], "cells"),
                           detail::parse_number<int>(parts[2], "cells"), detail::parse_number<int>(parts[3], "cells")};
    }
  }
  return ctx;
}

inline Params parse_query(const std::string& query) {
  Params out;
  if (query.empty()) return out;
  auto decode = [](const std::string& s) {
    std::string o;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '%') {
        unsigned v = 0;
        auto res = i + 2 < s.size() ? std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16)
                                    : std::from_chars_result{s.data(), std::errc::invalid_argument};
        if (res.ec != std::errc() || res.ptr != s.data() + i + 3) {
          throw Error(ErrorCode::MalformedFilter, "bad percent escape in query");
        }
        o += static_cast<char>(v);
        i += 2;
      } else if (s[i] == '+') {
        o += ' ';
      } else {
        o += s[i];
      }
    }
    return o;
  };
  for (const auto& pair : detail::split(query, '&')) {
    if (pair.empty()) continue;
    const auto eq = pair.find('=');
    out.emplace(decode(pair.substr(0, eq)), eq == std::string::npos ? std::string() : decode(pair.substr(eq + 1)));
  }
  return out;
}

inline FilterContext from_query(const std::string& query, std::string user) {
  return from_params(parse_query(query), std::move(user));
}

/// Records behind every view for a context: the summary pane's contents.
inline std::vector<RecordPtr> summary(const coordinator::Coordinator& c, const FilterContext& ctx) {
  return c.query_captures(ctx.user, ctx.filter());
}

// ---- calendar ----------------------------------------------------------------

struct DaySummary {
  std::chrono::year_month_day date;
  bool has_personal = false;
  bool has_collaborative = false;
  bool has_shared = false;
  std::vector<RecordId> records;

  friend bool operator==(const DaySummary&, const DaySummary&) = default;
};

inline std::string format_date(std::chrono::year_month_day d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

inline std::chrono::year_month_day utc_day(Timestamp t) {
  return std::chrono::year_month_day{std::chrono::floor<std::chrono::days>(t)};
}

/// One entry per UTC day in [first month, first month + months) holding at
/// least one visible record. The context's own date range still applies.
inline std::vector<DaySummary> calendar(const coordinator::Coordinator& c, FilterContext ctx,
                                        std::chrono::year_month first, int months) {
  using namespace std::chrono;
  if (!first.ok() || months < 1 || months > 120) throw Error(ErrorCode::MalformedRange, "invalid month span");
  if (ctx.from && ctx.to && *ctx.to < *ctx.from) throw Error(ErrorCode::MalformedRange, "range ends before it starts");
  const Timestamp span_start = time_point_cast<Millis>(sys_days{first / 1});
  const Timestamp span_end = time_point_cast<Millis>(sys_days{(first + std::chrono::months{months}) / 1});
  ctx.from = ctx.from ? std::max(*ctx.from, span_start) : span_start;
  ctx.to = ctx.to ? std::min(*ctx.to, span_end) : span_end;
  if (*ctx.to < *ctx.from) ctx.to = ctx.from;
  std::vector<DaySummary> out;
  for (const auto& r : summary(c, ctx)) {
    const auto day = utc_day(r->timestamp);
    if (out.empty() || out.back().date != day) out.push_back(DaySummary{day, false, false, false, {}});
    auto& d = out.back();
    d.has_personal |= r->content_type == coordinator::ContentType::Personal;
    d.has_collaborative |= r->content_type == coordinator::ContentType::Collaborative;
    d.has_shared |= r->is_shared();
    d.records.push_back(r->id);
  }
  return out;
}

inline std::chrono::year_month parse_month(const std::string& s) {
  if (s.size() != 7 || s[4] != '-') throw Error(ErrorCode::MalformedRange, "month must be YYYY-MM");
  int y = 0;
  unsigned m = 0;
  auto r1 = std::from_chars(s.data(), s.data() + 4, y);
  auto r2 = std::from_chars(s.data() + 5, s.data() + 7, m);
  if (r1.ec != std::errc() || r2.ec != std::errc() || r1.ptr != s.data() + 4 || r2.ptr != s.data() + 7) {
    throw Error(ErrorCode::MalformedRange, "month must be YYYY-MM");
  }
  std::chrono::year_month ym{std::chrono::year{y}, std::chrono::month{m}};
  if (!ym.ok()) throw Error(ErrorCode::MalformedRange, "month out of range");
  return ym;
}

// ---- timeline ----------------------------------------------------------------

struct TimelineBar {
  RecordId record = 0;
  Timestamp timestamp{};
  int height = 0;  // changed coarse cells

  friend bool operator==(const TimelineBar&, const TimelineBar&) = default;
};

inline std::vector<TimelineBar> timeline(const coordinator::Coordinator& c, const FilterContext& ctx) {
  if (ctx.from && ctx.to && *ctx.to < *ctx.from) throw Error(ErrorCode::MalformedRange, "range ends before it starts");
  std::vector<TimelineBar> out;
  for (const auto& r : summary(c, ctx)) out.push_back({r->id, r->timestamp, r->changed_cell_count});
  return out;
}

// ---- heatmap -----------------------------------------------------------------

inline constexpr int kColorBuckets = 5;

/// 0 for white; otherwise 1 (coldest) .. kColorBuckets (warmest) spread
/// linearly over [1, max_count].
inline int color_bucket(int count, int max_count) noexcept {
  if (count <= 0 || max_count <= 0) return 0;
  const int b = 1 + static_cast<int>(static_cast<long long>(count - 1) * kColorBuckets / max_count);
  return std::min(b, kColorBuckets);
}

struct HeatmapGrid {
  std::string camera_id;
  int cols = 0;
  int rows = imaging::kCoarseRows;
  std::vector<int> counts;  // row-major
  std::vector<int> colors;
  int max_count = 0;
  std::vector<RecordId> records;  // in-range captures, for thumbnail underlay

  int count(int c, int r) const { return counts.at(std::size_t(r) * cols + c); }
  int color(int c, int r) const { return colors.at(std::size_t(r) * cols + c); }
};

/// Per-cell count of visible captures whose coarse cell changed. Captures
/// taken under an older geometry with a different grid width are skipped.
inline HeatmapGrid heatmap(const coordinator::Coordinator& c, const FilterContext& ctx) {
  if (ctx.cameras.size() != 1) throw Error(ErrorCode::NoCameraSelected, "heatmap needs exactly one camera");
  if (ctx.from && ctx.to && *ctx.to < *ctx.from) throw Error(ErrorCode::MalformedRange, "range ends before it starts");
  const auto cam = c.camera(*ctx.cameras.begin());
  HeatmapGrid g;
  g.camera_id = cam.id;
  g.cols = imaging::coarse_columns(cam.geometry.aspect_ratio);
  g.counts.assign(std::size_t(g.cols) * g.rows, 0);
  for (const auto& r : summary(c, ctx)) {
    const auto& coarse = r->grids.coarse;
    if (coarse.cols != g.cols || coarse.rows != g.rows) continue;
    g.records.push_back(r->id);
    for (std::size_t i = 0; i < g.counts.size(); ++i) g.counts[i] += coarse.fraction[i] > r->cell_tolerance ? 1 : 0;
  }
  for (int v : g.counts) g.max_count = std::max(g.max_count, v);
  g.colors.resize(g.counts.size());
  for (std::size_t i = 0; i < g.counts.size(); ++i) g.colors[i] = color_bucket(g.counts[i], g.max_count);
  return g;
}

/// Narrows the context to the board area under a rectangle of heatmap cells.
/// Selecting the whole grid clears the region filter.
inline FilterContext region_select(FilterContext ctx, const CellRect& cells, int cols,
                                   int rows = imaging::kCoarseRows) {
  if (cells.c0 > cells.c1 || cells.r0 > cells.r1 || cells.c0 < 0 || cells.r0 < 0 || cells.c1 >= cols ||
      cells.r1 >= rows) {
    throw Error(ErrorCode::EmptySelection, "selection is empty or outside the grid");
  }
  if (cells.c0 == 0 && cells.r0 == 0 && cells.c1 == cols - 1 && cells.r1 == rows - 1) {
    ctx.region.reset();
    ctx.cells.reset();
    return ctx;
  }
  ctx.region = BoardRegion{static_cast<double>(cells.c0) / cols, static_cast<double>(cells.r0) / rows,
                           static_cast<double>(cells.c1 + 1) / cols, static_cast<double>(cells.r1 + 1) / rows};
  ctx.cells = cells;
  return ctx;
}

// ---- JSON --------------------------------------------------------------------

inline nlohmann::json to_json(const DaySummary& d) {
  return {{"date", format_date(d.date)},
          {"personal", d.has_personal},
          {"collaborative", d.has_collaborative},
          {"shared", d.has_shared},
          {"records", d.records}};
}

inline nlohmann::json to_json(const TimelineBar& b) {
  return {{"record_id", b.record}, {"t_ms", to_epoch_ms(b.timestamp)}, {"height", b.height}};
}

inline nlohmann::json to_json(const HeatmapGrid& g) {
  nlohmann::json thumbs = nlohmann::json::array();
  for (RecordId id : g.records) {
    thumbs.push_back({{"record_id", id}, {"image", "/captures/" + std::to_string(id) + "/image"}});
  }
  return {{"camera_id", g.camera_id}, {"cols", g.cols},         {"rows", g.rows},          {"counts", g.counts},
          {"colors", g.colors},       {"max_count", g.max_count}, {"thumbnails", thumbs}};
}

}  // namespace reboard::retrieval
