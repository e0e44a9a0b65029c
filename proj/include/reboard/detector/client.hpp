#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "reboard/coordinator/codec.hpp"
#include "reboard/detector/pipeline.hpp"
#include "reboard/feedsim/feed.hpp"

// After the library headers: <resolv.h> defines a `_res` macro that breaks Eigen.
#include "httplib.h"

namespace reboard::detector {

inline ErrorCode error_code_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::Conflict); ++i) {
    const auto c = static_cast<ErrorCode>(i);
    if (to_string(c) == name) return c;
  }
  return ErrorCode::StorageFailure;
}

/// Detector side of the coordinator's HTTP API.
class CoordinatorClient {
 public:
  CoordinatorClient(const std::string& host, int port) : http_(host, port) {
    http_.set_connection_timeout(5);
    http_.set_read_timeout(30);
  }

  coordinator::AssignmentDelta poll(const std::string& detector_id, coordinator::Revision since) {
    auto res = http_.Get("/assignments/" + detector_id + "?since=" + std::to_string(since));
    return coordinator::delta_from_json(check(res, "poll"));
  }

  /// Returns the id of the stored record.
  coordinator::RecordId post_capture(const capture::CaptureEvent& ev) {
    auto res = http_.Post("/events/capture", coordinator::to_json(ev).dump(), "application/json");
    return check(res, "capture").at("id").get<coordinator::RecordId>();
  }

  /// Returns how many stored records became collaborative.
  int post_interval(const collab::CollaborationInterval& iv) {
    auto res = http_.Post("/events/collaboration", coordinator::to_json(iv).dump(), "application/json");
    return check(res, "collaboration").at("upgraded").get<int>();
  }

  void report_manual_failure(const std::string& camera_id, const std::string& request_id, const std::string& reason) {
    nlohmann::json j{{"camera_id", camera_id}, {"request_id", request_id}, {"reason", reason}};
    check(http_.Post("/events/manual-capture-failed", j.dump(), "application/json"), "manual failure");
  }

 private:
  static nlohmann::json check(const httplib::Result& res, const char* what) {
    if (!res) {
      throw Error(ErrorCode::SourceUnavailable,
                  std::string(what) + ": coordinator unreachable (" + httplib::to_string(res.error()) + ")");
    }
    if (res->status == 204) return nlohmann::json::object();
    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (res->status / 100 != 2) {
      const auto code = j.is_object() ? j.value("error", std::string()) : std::string();
      const auto msg = j.is_object() ? j.value("message", res->body) : res->body;
      throw Error(error_code_from_name(code), std::string(what) + ": HTTP " + std::to_string(res->status) + " " + msg);
    }
    if (j.is_discarded()) throw Error(ErrorCode::DecodeError, std::string(what) + ": response is not JSON");
    return j;
  }

  httplib::Client http_;
};

/// Supplies the frame stream for a camera once it is assigned.
using FeedFactory = std::function<std::unique_ptr<feedsim::FrameFeed>(const CameraSettings&)>;

struct ServiceStats {
  int frames = 0;
  int captures_posted = 0;
  int intervals_posted = 0;
  int manual_served = 0;
  int manual_failed = 0;
  int polls = 0;
};

/// Runs one pipeline per assigned camera and keeps the set of cameras, their
/// settings and pending manual requests in step with the coordinator.
class DetectorService {
 public:
  DetectorService(std::string detector_id, CoordinatorClient& client, FeedFactory feeds)
      : id_(std::move(detector_id)), client_(client), feeds_(std::move(feeds)) {}

  /// Polls for assignment changes and applies them.
  void sync() {
    const auto delta = client_.poll(id_, revision_);
    ++stats_.polls;
    for (const auto& cam : delta.removed) drop(cam);
    for (const auto& a : delta.upserts) apply(a);
    revision_ = delta.revision;
  }

  /// Advances every live camera by one frame. Returns false once all feeds
  /// are exhausted.
  bool step() {
    bool any = false;
    for (auto& [cam, w] : workers_) {
      if (w.done) continue;
      auto frame = w.feed->next();
      if (!frame) {
        post_intervals(w.pipeline->finish(w.last));
        w.done = true;
        continue;
      }
      any = true;
      ++stats_.frames;
      w.last = frame->timestamp;
      auto out = w.pipeline->process(*frame, w.feed->bursts());
      post_intervals(out.intervals);
      for (auto& c : out.captures) {
        client_.post_capture(c.event);
        ++stats_.captures_posted;
      }
      serve_manual(w);
    }
    return any;
  }

  /// Alternates polling and stepping until the feeds run dry.
  void run(int frames_per_poll = 10) {
    sync();
    for (int n = 1; step(); ++n)
      if (n % frames_per_poll == 0) sync();
    sync();
  }

  bool assigned(const std::string& camera_id) const { return workers_.contains(camera_id); }
  std::vector<std::string> cameras() const {
    std::vector<std::string> out;
    for (const auto& [id, w] : workers_) out.push_back(id);
    return out;
  }
  const CameraPipeline& pipeline(const std::string& camera_id) const { return *workers_.at(camera_id).pipeline; }
  coordinator::Revision revision() const noexcept { return revision_; }
  /// Latest frame time across live cameras, for pacing replay against a clock.
  std::optional<Timestamp> stream_time() const {
    std::optional<Timestamp> t;
    for (const auto& [id, w] : workers_)
      if (w.last != Timestamp{} && (!t || w.last > *t)) t = w.last;
    return t;
  }
  const ServiceStats& stats() const noexcept { return stats_; }

 private:
  struct Worker {
    std::unique_ptr<CameraPipeline> pipeline;
    std::unique_ptr<feedsim::FrameFeed> feed;
    Timestamp last{};
    bool done = false;
    std::vector<std::string> requests;  // pending manual requests not yet served
  };

  void apply(const coordinator::CameraAssignment& a) {
    auto it = workers_.find(a.camera_id);
    if (it == workers_.end()) {
      Worker w;
      w.pipeline = std::make_unique<CameraPipeline>(a.settings);
      w.feed = feeds_(a.settings);
      if (!w.feed) throw Error(ErrorCode::SourceUnavailable, "no feed for camera " + a.camera_id);
      it = workers_.emplace(a.camera_id, std::move(w)).first;
    } else {
      it->second.pipeline->update_settings(a.settings);
    }
    for (const auto& r : a.manual_requests)
      if (!served_.contains(r)) it->second.requests.push_back(r);
  }

  void drop(const std::string& camera_id) {
    auto it = workers_.find(camera_id);
    if (it == workers_.end()) return;
    if (!it->second.done) post_intervals(it->second.pipeline->finish(it->second.last));
    workers_.erase(it);
  }

  // Manual requests are served at the camera's current stream time, so they
  // wait until the feed has produced at least one frame.
  void serve_manual(Worker& w) {
    for (const auto& r : w.requests) {
      if (!served_.insert(r).second) continue;
      try {
        client_.post_capture(w.pipeline->manual_capture(w.feed->bursts(), w.last, r));
        ++stats_.manual_served;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Obstructed && e.code() != ErrorCode::CaptureDisabled) throw;
        client_.report_manual_failure(w.pipeline->settings().camera_id, r, e.what());
        ++stats_.manual_failed;
      }
    }
    w.requests.clear();
  }

  void post_intervals(const std::vector<collab::CollaborationInterval>& ivs) {
    for (const auto& iv : ivs) {
      client_.post_interval(iv);
      ++stats_.intervals_posted;
    }
  }

  std::string id_;
  CoordinatorClient& client_;
  FeedFactory feeds_;
  std::map<std::string, Worker> workers_;
  std::set<std::string> served_;
  coordinator::Revision revision_ = 0;
  ServiceStats stats_;
};

}  // namespace reboard::detector
