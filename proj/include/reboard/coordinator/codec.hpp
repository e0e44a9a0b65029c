#pragma once

#include <openssl/evp.h>

#include <string>
#include <vector>

#include "json.hpp"
#include "reboard/coordinator/types.hpp"
#include "reboard/feedsim/generator.hpp"
#include "reboard/imaging/png_io.hpp"

namespace reboard::coordinator {

using nlohmann::json;

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::DecodeError, "base64 length must be a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::DecodeError, "invalid base64 payload");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

// Any parsing failure below surfaces as InvalidArgument so the HTTP layer can
// answer 400 without catching nlohmann's exception types.
template <class F>
auto parse_guard(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed ") + what + ": " + e.what());
  }
}

inline json to_json(const motion::MotionConfig& c) {
  return {{"motion_gate", c.motion_gate},         {"min_blob_area", c.min_blob_area},
          {"max_blob_area", c.max_blob_area},     {"pixel_tolerance", c.pixel_tolerance},
          {"aggregation_frames", c.aggregation_frames}};
}

inline json to_json(const collab::CollabConfig& c) {
  return {{"history_span_ms", c.history_span.count()},
          {"evaluation_cadence_ms", c.evaluation_cadence.count()},
          {"start_window_ms", c.start_window.count()},
          {"start_threshold", c.start_threshold},
          {"end_threshold", c.end_threshold}};
}

inline json to_json(const capture::CaptureConfig& c) {
  return {{"burst_size", c.burst_size},
          {"burst_spacing_ms", c.burst_spacing.count()},
          {"burst_agreement_tolerance", c.burst_agreement_tolerance},
          {"min_brightness", c.min_brightness},
          {"static_occlusion_area", c.static_occlusion_area},
          {"occlusion_fill_ratio", c.occlusion_fill_ratio},
          {"high_pass_k", c.high_pass_k},
          {"change_threshold", c.change_threshold},
          {"cell_change_tolerance", c.cell_change_tolerance},
          {"pixel_tolerance", c.pixel_tolerance},
          {"out_height", c.out_height},
          {"poll_cadence_ms", c.poll_cadence.count()},
          {"manual_retries", c.manual_retries}};
}

inline json to_json(const CameraConfig& c) {
  return {{"motion", to_json(c.motion)}, {"collab", to_json(c.collab)}, {"capture", to_json(c.capture)}};
}

/// Missing keys keep their defaults, so partial bundles are accepted.
inline CameraConfig camera_config_from_json(const json& j) {
  return parse_guard("camera config", [&] {
    CameraConfig c;
    const json m = j.value("motion", json::object());
    c.motion.motion_gate = m.value("motion_gate", c.motion.motion_gate);
    c.motion.min_blob_area = m.value("min_blob_area", c.motion.min_blob_area);
    c.motion.max_blob_area = m.value("max_blob_area", c.motion.max_blob_area);
    c.motion.pixel_tolerance = m.value("pixel_tolerance", c.motion.pixel_tolerance);
    c.motion.aggregation_frames = m.value("aggregation_frames", c.motion.aggregation_frames);
    const json l = j.value("collab", json::object());
    c.collab.history_span = Millis{l.value("history_span_ms", c.collab.history_span.count())};
    c.collab.evaluation_cadence = Millis{l.value("evaluation_cadence_ms", c.collab.evaluation_cadence.count())};
    c.collab.start_window = Millis{l.value("start_window_ms", c.collab.start_window.count())};
    c.collab.start_threshold = l.value("start_threshold", c.collab.start_threshold);
    c.collab.end_threshold = l.value("end_threshold", c.collab.end_threshold);
    const json p = j.value("capture", json::object());
    auto& cc = c.capture;
    cc.burst_size = p.value("burst_size", cc.burst_size);
    cc.burst_spacing = Millis{p.value("burst_spacing_ms", cc.burst_spacing.count())};
    cc.burst_agreement_tolerance = p.value("burst_agreement_tolerance", cc.burst_agreement_tolerance);
    cc.min_brightness = p.value("min_brightness", cc.min_brightness);
    cc.static_occlusion_area = p.value("static_occlusion_area", cc.static_occlusion_area);
    cc.occlusion_fill_ratio = p.value("occlusion_fill_ratio", cc.occlusion_fill_ratio);
    cc.high_pass_k = p.value("high_pass_k", cc.high_pass_k);
    cc.change_threshold = p.value("change_threshold", cc.change_threshold);
    cc.cell_change_tolerance = p.value("cell_change_tolerance", cc.cell_change_tolerance);
    cc.pixel_tolerance = p.value("pixel_tolerance", cc.pixel_tolerance);
    cc.out_height = p.value("out_height", cc.out_height);
    cc.poll_cadence = Millis{p.value("poll_cadence_ms", cc.poll_cadence.count())};
    cc.manual_retries = p.value("manual_retries", cc.manual_retries);
    c.motion.validate();
    c.collab.validate();
    c.capture.validate();
    return c;
  });
}

inline json to_json(const imaging::Grid& g) { return {{"cols", g.cols}, {"rows", g.rows}, {"fraction", g.fraction}}; }

inline imaging::Grid grid_from_json(const json& j) {
  imaging::Grid g(j.at("cols").get<int>(), j.at("rows").get<int>());
  auto f = j.at("fraction").get<std::vector<double>>();
  if (g.cols <= 0 || g.rows <= 0 || f.size() != g.fraction.size()) {
    throw Error(ErrorCode::InvalidArgument, "grid size does not match its dimensions");
  }
  g.fraction = std::move(f);
  return g;
}

inline json to_json(const imaging::RegionGridSet& s) {
  return {{"columns", s.columns}, {"coarse", to_json(s.coarse)}, {"fine", to_json(s.fine)}};
}

inline imaging::RegionGridSet grids_from_json(const json& j) {
  return parse_guard("region grids", [&] {
    imaging::RegionGridSet s;
    s.columns = j.at("columns").get<int>();
    s.coarse = grid_from_json(j.at("coarse"));
    s.fine = grid_from_json(j.at("fine"));
    if (s.coarse.cols != s.columns || s.coarse.rows != imaging::kCoarseRows ||
        s.fine.cols != s.columns * imaging::kFineFactor || s.fine.rows != imaging::kCoarseRows * imaging::kFineFactor) {
      throw Error(ErrorCode::InvalidArgument, "grids are not X-by-10 and 10X-by-100");
    }
    return s;
  });
}

inline json to_json(const capture::CaptureEvent& e) {
  return {{"camera_id", e.camera_id},
          {"t_ms", to_epoch_ms(e.timestamp)},
          {"trigger", std::string(to_string(e.trigger))},
          {"request_id", e.request_id},
          {"changed_cell_count", e.changed_cell_count},
          {"changed_fraction", e.changed_fraction},
          {"image_png", base64_encode(imaging::encode_png(e.image))},
          {"grids", to_json(e.grids)}};
}

inline capture::CaptureEvent capture_event_from_json(const json& j) {
  return parse_guard("capture event", [&] {
    capture::CaptureEvent e;
    e.camera_id = j.at("camera_id").get<std::string>();
    e.timestamp = from_epoch_ms(j.at("t_ms").get<std::int64_t>());
    const auto trig = j.value("trigger", std::string("automatic"));
    if (trig != "automatic" && trig != "manual") throw Error(ErrorCode::InvalidArgument, "unknown trigger " + trig);
    e.trigger = trig == "manual" ? capture::Trigger::Manual : capture::Trigger::Automatic;
    e.request_id = j.value("request_id", std::string());
    e.changed_cell_count = j.value("changed_cell_count", 0);
    e.changed_fraction = j.value("changed_fraction", 0.0);
    e.image = imaging::decode_png_gray(base64_decode(j.at("image_png").get<std::string>()));
    e.grids = grids_from_json(j.at("grids"));
    return e;
  });
}

inline json to_json(const collab::CollaborationInterval& iv) {
  return {{"camera_id", iv.camera_id}, {"start_ms", to_epoch_ms(iv.start)}, {"end_ms", to_epoch_ms(iv.end)}};
}

inline collab::CollaborationInterval interval_from_json(const json& j) {
  return parse_guard("collaboration interval", [&] {
    return collab::CollaborationInterval{j.at("camera_id").get<std::string>(),
                                         from_epoch_ms(j.at("start_ms").get<std::int64_t>()),
                                         from_epoch_ms(j.at("end_ms").get<std::int64_t>())};
  });
}

inline json rect_json(const imaging::Rect& r) { return json::array({r.x, r.y, r.w, r.h}); }

inline imaging::Rect rect_from_json(const json& j) {
  return parse_guard("rectangle", [&] {
    if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::InvalidArgument, "rectangle must be [x,y,w,h]");
    return imaging::Rect{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  });
}

inline json to_json(const detector::CameraSettings& s) {
  return {{"camera_id", s.camera_id},
          {"geometry", feedsim::geometry_to_json(s.geometry)},
          {"config", to_json(CameraConfig{s.motion, s.collab, s.capture})},
          {"capture_enabled", s.capture_enabled}};
}

inline detector::CameraSettings settings_from_json(const json& j) {
  return parse_guard("camera settings", [&] {
    const auto cfg = camera_config_from_json(j.at("config"));
    detector::CameraSettings s{j.at("camera_id").get<std::string>(), feedsim::geometry_from_json(j.at("geometry")),
                               cfg.motion, cfg.collab, cfg.capture, j.value("capture_enabled", true)};
    return s;
  });
}

inline json to_json(const AssignmentDelta& d) {
  json ups = json::array();
  for (const auto& a : d.upserts) {
    ups.push_back({{"camera_id", a.camera_id}, {"settings", to_json(a.settings)}, {"manual_requests", a.manual_requests}});
  }
  return {{"detector_id", d.detector_id}, {"since", d.since}, {"revision", d.revision},
          {"upserts", ups},               {"removed", d.removed}};
}

inline AssignmentDelta delta_from_json(const json& j) {
  return parse_guard("assignment delta", [&] {
    AssignmentDelta d;
    d.detector_id = j.at("detector_id").get<std::string>();
    d.since = j.at("since").get<Revision>();
    d.revision = j.at("revision").get<Revision>();
    for (const auto& u : j.at("upserts")) {
      d.upserts.push_back({u.at("camera_id").get<std::string>(), settings_from_json(u.at("settings")),
                           u.value("manual_requests", std::vector<std::string>{})});
    }
    d.removed = j.at("removed").get<std::vector<std::string>>();
    return d;
  });
}

inline json to_json(const User& u) { return {{"id", u.id}, {"display_name", u.display_name}}; }

inline json to_json(const Camera& c) {
  return {{"id", c.id},
          {"owner", c.owner},
          {"location", c.location},
          {"capture_enabled", c.capture_enabled},
          {"geometry", feedsim::geometry_to_json(c.geometry)},
          {"config", to_json(c.config)}};
}

inline json to_json(const ManualRequest& r) {
  json j{{"request_id", r.id},
         {"camera_id", r.camera_id},
         {"requested_ms", to_epoch_ms(r.requested)},
         {"status", std::string(to_string(r.status))}};
  j["record_id"] = r.record ? json(*r.record) : json(nullptr);
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

/// Coarse cells above the record's tolerance, as row-major indices.
inline std::vector<int> changed_coarse_indices(const CaptureRecord& r) {
  std::vector<int> out;
  for (std::size_t i = 0; i < r.grids.coarse.fraction.size(); ++i)
    if (r.grids.coarse.fraction[i] > r.cell_tolerance) out.push_back(static_cast<int>(i));
  return out;
}

/// Record summary as served to `viewer`. Viewers who only received a share see
/// their own crop and nothing about other recipients.
inline json record_summary(const CaptureRecord& r, bool full_access, const std::string& viewer) {
  json shares = json::array();
  for (const auto& [user, crop] : r.shared_with) {
    if (!full_access && user != viewer) continue;
    shares.push_back({{"user", user}, {"crop", crop ? rect_json(*crop) : json(nullptr)}});
  }
  return {{"id", r.id},
          {"camera_id", r.camera_id},
          {"t_ms", to_epoch_ms(r.timestamp)},
          {"image", "/captures/" + std::to_string(r.id) + "/image"},
          {"width", r.width},
          {"height", r.height},
          {"trigger", std::string(to_string(r.trigger))},
          {"content_type", std::string(to_string(r.content_type))},
          {"shared", r.is_shared()},
          {"shared_with", shares},
          {"contributors", r.contributors},
          {"bookmarked", r.bookmarked},
          {"tags", r.tags},
          {"label", r.label},
          {"description", r.description},
          {"changed_cell_count", r.changed_cell_count},
          {"coarse", {{"cols", r.grids.coarse.cols}, {"rows", r.grids.coarse.rows},
                      {"changed", changed_coarse_indices(r)}}}};
}

inline MetadataPatch metadata_patch_from_json(const json& j) {
  return parse_guard("metadata patch", [&] {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "metadata patch must be an object");
    MetadataPatch p;
    if (j.contains("contributors")) p.contributors = j["contributors"].get<std::set<std::string>>();
    if (j.contains("tags")) p.tags = j["tags"].get<std::set<std::string>>();
    if (j.contains("label")) p.label = j["label"].get<std::string>();
    if (j.contains("description")) p.description = j["description"].get<std::string>();
    if (j.contains("bookmarked")) p.bookmarked = j["bookmarked"].get<bool>();
    return p;
  });
}

}  // namespace reboard::coordinator
