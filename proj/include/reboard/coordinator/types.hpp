#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "reboard/capture/capture.hpp"
#include "reboard/collab/collab.hpp"
#include "reboard/detector/pipeline.hpp"
#include "reboard/imaging/geometry.hpp"
#include "reboard/imaging/grids.hpp"
#include "reboard/motion/motion.hpp"

namespace reboard::coordinator {

using RecordId = std::int64_t;
using Revision = std::int64_t;

struct User {
  std::string id;
  std::string display_name;
  std::string credentials;  // opaque reference, never served

  friend bool operator==(const User&, const User&) = default;
};

struct CameraConfig {
  motion::MotionConfig motion;
  collab::CollabConfig collab;
  capture::CaptureConfig capture;

  friend bool operator==(const CameraConfig&, const CameraConfig&) = default;
};

struct Camera {
  std::string id;
  std::string owner;
  imaging::BoardGeometry geometry;
  CameraConfig config;
  std::string location;
  bool capture_enabled = true;

  detector::CameraSettings settings() const {
    return {id, geometry, config.motion, config.collab, config.capture, capture_enabled};
  }

  friend bool operator==(const Camera&, const Camera&) = default;
};

enum class ContentType { Personal, Collaborative };

inline constexpr std::string_view to_string(ContentType c) noexcept {
  return c == ContentType::Collaborative ? "collaborative" : "personal";
}

inline ContentType parse_content_type(std::string_view s) {
  if (s == "personal") return ContentType::Personal;
  if (s == "collaborative") return ContentType::Collaborative;
  throw Error(ErrorCode::InvalidArgument, "unknown content type '" + std::string(s) + "'");
}

struct CaptureRecord {
  RecordId id = 0;
  std::string camera_id;
  Timestamp timestamp{};
  std::string image_ref;  // sha256 of the PNG payload
  int width = 0;
  int height = 0;
  capture::Trigger trigger = capture::Trigger::Automatic;
  std::string request_id;
  imaging::RegionGridSet grids;
  double cell_tolerance = 0.02;  // tolerance in force when the record was ingested
  int changed_cell_count = 0;
  ContentType content_type = ContentType::Personal;
  std::map<std::string, std::optional<imaging::Rect>> shared_with;  // user -> crop
  std::set<std::string> contributors;
  bool bookmarked = false;
  std::set<std::string> tags;
  std::string label;
  std::string description;

  bool is_shared() const noexcept { return !shared_with.empty(); }
};

/// One camera as seen by the detector it is assigned to.
struct CameraAssignment {
  std::string camera_id;
  detector::CameraSettings settings;
  std::vector<std::string> manual_requests;  // pending, oldest first
};

/// Changes to a detector's assignment since some revision. Applying `upserts`
/// and `removed` to the state at `since` yields the state at `revision`.
struct AssignmentDelta {
  std::string detector_id;
  Revision since = 0;
  Revision revision = 0;
  std::vector<CameraAssignment> upserts;
  std::vector<std::string> removed;

  bool empty() const noexcept { return upserts.empty() && removed.empty(); }
};

struct Detector {
  std::string id;
  std::string role = "pipeline";
};

enum class ManualStatus { Pending, Done, Failed };

inline constexpr std::string_view to_string(ManualStatus s) noexcept {
  switch (s) {
    case ManualStatus::Pending: return "pending";
    case ManualStatus::Done: return "done";
    case ManualStatus::Failed: return "failed";
  }
  return "?";
}

struct ManualRequest {
  std::string id;
  std::string camera_id;
  Timestamp requested{};
  ManualStatus status = ManualStatus::Pending;
  std::optional<RecordId> record;
  std::string reason;
};

/// Partial update for set_metadata; absent fields are left alone.
struct MetadataPatch {
  std::optional<std::set<std::string>> contributors;
  std::optional<std::set<std::string>> tags;
  std::optional<std::string> label;
  std::optional<std::string> description;
  std::optional<bool> bookmarked;
};

/// Normalised board rectangle, [x0,x1) x [y0,y1) in units of board width/height.
struct BoardRegion {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  void validate() const {
    auto in = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in(x0) || !in(y0) || !in(x1) || !in(y1) || !(x0 < x1) || !(y0 < y1)) {
      throw Error(ErrorCode::MalformedFilter, "region must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1");
    }
  }
  bool full() const noexcept { return x0 <= 0.0 && y0 <= 0.0 && x1 >= 1.0 && y1 >= 1.0; }

  friend bool operator==(const BoardRegion&, const BoardRegion&) = default;
};

/// Bit set over {personal, collaborative, shared}. Zero means no type filter.
enum TypeMask : unsigned { kPersonal = 1, kCollaborative = 2, kShared = 4, kAllTypes = 7 };

struct CaptureFilter {
  std::set<std::string> cameras;  // empty = all
  std::optional<Timestamp> from;  // inclusive
  std::optional<Timestamp> to;    // exclusive
  unsigned types = 0;
  std::string keyword;
  std::optional<BoardRegion> region;
};

}  // namespace reboard::coordinator
