#pragma once

#include <algorithm>
#include <cctype>
#include <functional>
#include <memory>
#include <mutex>
#include <shared_mutex>

#include "reboard/coordinator/image_store.hpp"
#include "reboard/coordinator/share.hpp"
#include "reboard/coordinator/store.hpp"

namespace reboard::coordinator {

using RecordPtr = std::shared_ptr<const CaptureRecord>;
using Clock = std::function<Timestamp()>;

inline Timestamp system_now() { return std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now()); }

inline bool contains_closed(const collab::CollaborationInterval& iv, Timestamp t) noexcept {
  return iv.start <= t && t <= iv.end;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// True when any fine cell lying wholly inside `region` changed.
inline bool touches_region(const CaptureRecord& r, const BoardRegion& region) {
  const auto& g = r.grids.fine;
  constexpr double eps = 1e-9;
  const int c0 = static_cast<int>(std::ceil(region.x0 * g.cols - eps));
  const int c1 = static_cast<int>(std::floor(region.x1 * g.cols + eps));  // exclusive
  const int r0 = static_cast<int>(std::ceil(region.y0 * g.rows - eps));
  const int r1 = static_cast<int>(std::floor(region.y1 * g.rows + eps));
  for (int y = std::max(r0, 0); y < std::min(r1, g.rows); ++y)
    for (int x = std::max(c0, 0); x < std::min(c1, g.cols); ++x)
      if (g(x, y) > r.cell_tolerance) return true;
  return false;
}

inline imaging::GrayImage crop(const imaging::GrayImage& img, const imaging::Rect& r) {
  imaging::GrayImage out(r.w, r.h);
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x) out(x, y) = img(r.x + x, r.y + y);
  return out;
}

/// The application server's state and operations. All mutations take an
/// exclusive lock and are written through to the relational store before the
/// in-memory model changes; queries take a shared lock and return immutable
/// record snapshots.
class Coordinator {
 public:
  Coordinator(std::unique_ptr<Store> store, ImageStore images, Clock clock = system_now)
      : store_(std::move(store)), images_(std::move(images)), clock_(std::move(clock)) {
    auto st = store_->load();
    users_ = std::move(st.users);
    cameras_ = std::move(st.cameras);
    detectors_ = std::move(st.detectors);
    assignments_ = std::move(st.assignments);
    revision_ = st.revision;
    for (auto& [id, r] : st.records) {
      next_record_ = std::max(next_record_, id + 1);
      records_[id] = std::make_shared<const CaptureRecord>(std::move(r));
    }
    for (auto& iv : st.intervals) intervals_[iv.camera_id].push_back(iv);
    manual_ = std::move(st.manual_requests);
    next_request_ = st.next_request;
  }

  // ---- registry -----------------------------------------------------------

  void put_user(const User& u) {
    if (u.id.empty()) throw Error(ErrorCode::InvalidArgument, "user id must not be empty");
    std::unique_lock lock(mu_);
    store_->put_user(u);
    users_[u.id] = u;
  }

  /// Creates or replaces a camera. Detectors holding it see the new settings on
  /// their next poll.
  void put_camera(const Camera& c) {
    if (c.id.empty()) throw Error(ErrorCode::InvalidArgument, "camera id must not be empty");
    c.settings().validate();
    std::unique_lock lock(mu_);
    if (!users_.contains(c.owner)) throw Error(ErrorCode::UnknownUser, c.owner);
    store_->transaction([&] {
      store_->put_camera(c);
      touch_camera_locked(c.id);
    });
    cameras_[c.id] = c;
  }

  void put_detector(const Detector& d) {
    if (d.id.empty()) throw Error(ErrorCode::InvalidArgument, "detector id must not be empty");
    std::unique_lock lock(mu_);
    store_->put_detector(d);
    detectors_[d.id] = d;
  }

  /// Assigns a camera to a detector, taking it away from any other detector of
  /// the same role.
  void assign(const std::string& camera_id, const std::string& detector_id) {
    std::unique_lock lock(mu_);
    require_camera_locked(camera_id);
    const auto& det = require_detector_locked(detector_id);
    store_->transaction([&] {
      for (const auto& [other, cams] : assignments_) {
        if (other == detector_id || detectors_.at(other).role != det.role) continue;
        auto it = cams.find(camera_id);
        if (it != cams.end() && !it->second.second) set_assignment_locked(other, camera_id, true);
      }
      set_assignment_locked(detector_id, camera_id, false);
    });
  }

  void unassign(const std::string& camera_id, const std::string& detector_id) {
    std::unique_lock lock(mu_);
    require_camera_locked(camera_id);
    require_detector_locked(detector_id);
    auto& cams = assignments_[detector_id];
    auto it = cams.find(camera_id);
    if (it == cams.end() || it->second.second) return;
    store_->transaction([&] { set_assignment_locked(detector_id, camera_id, true); });
  }

  AssignmentDelta poll_assignments(const std::string& detector_id, Revision known) const {
    std::shared_lock lock(mu_);
    require_detector_locked(detector_id);
    // A detector ahead of the server (e.g. after a database reset) starts over.
    if (known > revision_ || known < 0) known = 0;
    AssignmentDelta d{detector_id, known, revision_, {}, {}};
    auto it = assignments_.find(detector_id);
    if (it == assignments_.end()) return d;
    for (const auto& [cam, entry] : it->second) {
      if (entry.first <= known) continue;
      if (entry.second) {
        d.removed.push_back(cam);
      } else {
        d.upserts.push_back(assignment_locked(cam));
      }
    }
    return d;
  }

  // ---- ingestion ----------------------------------------------------------

  CaptureRecord ingest_capture(const capture::CaptureEvent& ev) {
    const auto t = to_epoch_ms(ev.timestamp);
    if (t < 0 || t >= kMaxTimestampMs) throw Error(ErrorCode::InvalidArgument, "capture timestamp out of range");
    if (ev.image.empty()) throw Error(ErrorCode::InvalidArgument, "capture carries no image");
    if (ev.grids.coarse.cols != ev.grids.columns || ev.grids.coarse.rows != imaging::kCoarseRows ||
        ev.grids.fine.cols != ev.grids.columns * imaging::kFineFactor ||
        ev.grids.fine.rows != imaging::kCoarseRows * imaging::kFineFactor) {
      throw Error(ErrorCode::InvalidArgument, "capture grids are not X-by-10 and 10X-by-100");
    }
    const auto png = imaging::encode_png(ev.image);

    std::unique_lock lock(mu_);
    const Camera& cam = require_camera_locked(ev.camera_id);
    if (!cam.capture_enabled) throw Error(ErrorCode::CaptureDisabled, "capture disabled for camera " + cam.id);

    CaptureRecord r;
    r.id = next_record_;
    r.camera_id = ev.camera_id;
    r.timestamp = ev.timestamp;
    r.width = ev.image.width();
    r.height = ev.image.height();
    r.trigger = ev.trigger;
    r.request_id = ev.request_id;
    r.grids = ev.grids;
    r.cell_tolerance = cam.config.capture.cell_change_tolerance;
    r.changed_cell_count = r.grids.coarse.count_above(r.cell_tolerance);
    r.content_type = in_interval_locked(r.camera_id, r.timestamp) ? ContentType::Collaborative : ContentType::Personal;
    r.image_ref = images_.put(png);

    ManualRequest* req = nullptr;
    if (!ev.request_id.empty()) {
      auto it = manual_.find(ev.request_id);
      if (it != manual_.end() && it->second.camera_id == r.camera_id && it->second.status == ManualStatus::Pending) {
        req = &it->second;
      }
    }
    ManualRequest done = req ? *req : ManualRequest{};
    done.status = ManualStatus::Done;
    done.record = r.id;
    store_->transaction([&] {
      store_->put_record(r);
      if (req) {
        store_->put_manual_request(done);
        touch_camera_locked(r.camera_id);
      }
    });
    if (req) *req = done;
    ++next_record_;
    records_[r.id] = std::make_shared<const CaptureRecord>(r);
    return r;
  }

  /// Stores the interval and upgrades every capture of that camera inside it.
  /// Returns the number of records whose label changed.
  int ingest_collaboration(const collab::CollaborationInterval& iv) {
    if (iv.end < iv.start) throw Error(ErrorCode::InvalidArgument, "interval ends before it starts");
    std::unique_lock lock(mu_);
    require_camera_locked(iv.camera_id);
    std::vector<RecordId> upgrade;
    for (const auto& [id, r] : records_) {
      if (r->camera_id == iv.camera_id && r->content_type == ContentType::Personal && contains_closed(iv, r->timestamp)) {
        upgrade.push_back(id);
      }
    }
    auto& list = intervals_[iv.camera_id];
    const bool known = std::find(list.begin(), list.end(), iv) != list.end();
    store_->transaction([&] {
      if (!known) store_->put_interval(iv);
      for (RecordId id : upgrade) store_->set_content_type(id, ContentType::Collaborative);
    });
    if (!known) list.push_back(iv);
    for (RecordId id : upgrade) {
      auto copy = std::make_shared<CaptureRecord>(*records_.at(id));
      copy->content_type = ContentType::Collaborative;
      records_[id] = std::move(copy);
    }
    return static_cast<int>(upgrade.size());
  }

  // ---- record metadata ------------------------------------------------------

  CaptureRecord share(RecordId id, const std::string& acting_user, const std::set<std::string>& targets,
                      std::optional<imaging::Rect> region = std::nullopt) {
    std::unique_lock lock(mu_);
    const auto& rec = require_record_locked(id);
    if (cameras_.at(rec.camera_id).owner != acting_user) {
      throw Error(ErrorCode::NotOwner, acting_user + " does not own camera " + rec.camera_id);
    }
    if (targets.empty()) throw Error(ErrorCode::InvalidArgument, "share needs at least one target user");
    for (const auto& u : targets)
      if (!users_.contains(u)) throw Error(ErrorCode::UnknownUser, u);
    if (region) {
      if (region->empty() || region->x < 0 || region->y < 0 || region->right() > rec.width ||
          region->bottom() > rec.height) {
        throw Error(ErrorCode::InvalidArgument, "share region must be non-empty and inside the image");
      }
    } else {
      region = default_share_crop(rec);
      if (!region) throw Error(ErrorCode::EmptyChange, "record has no changed region to share by default");
    }
    CaptureRecord updated = rec;
    for (const auto& u : targets) updated.shared_with[u] = region;
    return commit_metadata_locked(std::move(updated));
  }

  CaptureRecord set_metadata(RecordId id, const std::string& acting_user, const MetadataPatch& patch) {
    std::unique_lock lock(mu_);
    const auto& rec = require_record_locked(id);
    if (cameras_.at(rec.camera_id).owner != acting_user && !rec.contributors.contains(acting_user)) {
      throw Error(ErrorCode::NotAuthorized, acting_user + " may not edit record " + std::to_string(id));
    }
    CaptureRecord updated = rec;
    if (patch.contributors) {
      for (const auto& u : *patch.contributors)
        if (!users_.contains(u)) throw Error(ErrorCode::UnknownUser, u);
      updated.contributors = *patch.contributors;
    }
    if (patch.tags) {
      updated.tags.clear();
      for (const auto& t : *patch.tags)
        if (!t.empty()) updated.tags.insert(t);
    }
    if (patch.label) updated.label = *patch.label;
    if (patch.description) updated.description = *patch.description;
    if (patch.bookmarked) updated.bookmarked = *patch.bookmarked;
    return commit_metadata_locked(std::move(updated));
  }

  // ---- camera control -------------------------------------------------------

  void set_capture_enabled(const std::string& camera_id, const std::string& acting_user, bool enabled) {
    std::unique_lock lock(mu_);
    Camera cam = require_camera_locked(camera_id);
    if (cam.owner != acting_user) throw Error(ErrorCode::NotOwner, acting_user + " does not own camera " + camera_id);
    if (cam.capture_enabled == enabled) return;
    cam.capture_enabled = enabled;
    store_->transaction([&] {
      store_->put_camera(cam);
      touch_camera_locked(camera_id);
    });
    cameras_[camera_id] = cam;
  }

  /// Queues a manual capture; the assigned detector picks it up on its next
  /// poll and answers with a capture event carrying the request id.
  ManualRequest request_manual_capture(const std::string& camera_id, const std::string& acting_user) {
    std::unique_lock lock(mu_);
    const Camera& cam = require_camera_locked(camera_id);
    if (cam.owner != acting_user) throw Error(ErrorCode::NotOwner, acting_user + " does not own camera " + camera_id);
    if (!cam.capture_enabled) throw Error(ErrorCode::CaptureDisabled, "capture disabled for camera " + camera_id);
    ManualRequest r{"req-" + std::to_string(next_request_), camera_id, clock_(), ManualStatus::Pending, {}, {}};
    store_->transaction([&] {
      store_->put_manual_request(r);
      store_->put_meta("next_request", next_request_ + 1);
      touch_camera_locked(camera_id);
    });
    ++next_request_;
    manual_[r.id] = r;
    return r;
  }

  /// Detector report that a manual request could not be served.
  void fail_manual_capture(const std::string& camera_id, const std::string& request_id, const std::string& reason) {
    std::unique_lock lock(mu_);
    require_camera_locked(camera_id);
    auto it = manual_.find(request_id);
    if (it == manual_.end() || it->second.camera_id != camera_id) {
      throw Error(ErrorCode::UnknownRecord, "unknown manual request " + request_id);
    }
    if (it->second.status != ManualStatus::Pending) return;
    ManualRequest r = it->second;
    r.status = ManualStatus::Failed;
    r.reason = reason;
    store_->transaction([&] {
      store_->put_manual_request(r);
      touch_camera_locked(camera_id);
    });
    it->second = r;
  }

  ManualRequest manual_request(const std::string& request_id, const std::string& acting_user) const {
    std::shared_lock lock(mu_);
    auto it = manual_.find(request_id);
    if (it == manual_.end()) throw Error(ErrorCode::UnknownRecord, "unknown manual request " + request_id);
    if (cameras_.at(it->second.camera_id).owner != acting_user) {
      throw Error(ErrorCode::NotOwner, acting_user + " does not own camera " + it->second.camera_id);
    }
    return it->second;
  }

  // ---- queries --------------------------------------------------------------

  /// Records `user` may see matching every supplied filter, by timestamp.
  std::vector<RecordPtr> query_captures(const std::string& user, const CaptureFilter& f) const {
    if (f.from && f.to && *f.to < *f.from) throw Error(ErrorCode::MalformedFilter, "date range ends before it starts");
    if (f.types & ~unsigned(kAllTypes)) throw Error(ErrorCode::MalformedFilter, "unknown content type bits");
    if (f.region) f.region->validate();
    const std::string needle = ascii_lower(f.keyword);
    std::shared_lock lock(mu_);
    require_user_locked(user);
    std::vector<RecordPtr> out;
    for (const auto& [id, r] : records_) {
      if (!visible_locked(*r, user)) continue;
      if (!f.cameras.empty() && !f.cameras.contains(r->camera_id)) continue;
      if (f.from && r->timestamp < *f.from) continue;
      if (f.to && r->timestamp >= *f.to) continue;
      if (f.types != 0) {
        const bool ok = ((f.types & kPersonal) && r->content_type == ContentType::Personal) ||
                        ((f.types & kCollaborative) && r->content_type == ContentType::Collaborative) ||
                        ((f.types & kShared) && r->is_shared());
        if (!ok) continue;
      }
      if (!needle.empty() && ascii_lower(r->label).find(needle) == std::string::npos &&
          ascii_lower(r->description).find(needle) == std::string::npos) {
        continue;
      }
      if (f.region && !touches_region(*r, *f.region)) continue;
      out.push_back(r);
    }
    std::stable_sort(out.begin(), out.end(), [](const RecordPtr& a, const RecordPtr& b) {
      return a->timestamp != b->timestamp ? a->timestamp < b->timestamp : a->id < b->id;
    });
    return out;
  }

  /// A single record, if `user` may see it.
  RecordPtr record(RecordId id, const std::string& user) const {
    std::shared_lock lock(mu_);
    require_user_locked(user);
    auto it = records_.find(id);
    if (it == records_.end()) throw Error(ErrorCode::UnknownRecord, "record " + std::to_string(id));
    if (!visible_locked(*it->second, user)) {
      throw Error(ErrorCode::NotAuthorized, user + " may not view record " + std::to_string(id));
    }
    return it->second;
  }

  /// Whether `user` sees the whole record (owner or contributor) rather than
  /// only a share.
  bool full_access(const CaptureRecord& r, const std::string& user) const {
    std::shared_lock lock(mu_);
    return full_access_locked(r, user);
  }

  /// PNG of the record as `user` may see it: whole for owner and contributors,
  /// the share crop otherwise.
  std::vector<std::uint8_t> image_png(RecordId id, const std::string& user) const {
    const RecordPtr r = record(id, user);
    auto bytes = images_.get(r->image_ref);
    if (full_access(*r, user)) return bytes;
    const auto& crop_rect = r->shared_with.at(user);
    if (!crop_rect) return bytes;
    return imaging::encode_png(crop(imaging::decode_png_gray(bytes), *crop_rect));
  }

  std::vector<User> users() const {
    std::shared_lock lock(mu_);
    std::vector<User> out;
    for (const auto& [id, u] : users_) out.push_back(u);
    return out;
  }

  std::vector<Camera> cameras() const {
    std::shared_lock lock(mu_);
    std::vector<Camera> out;
    for (const auto& [id, c] : cameras_) out.push_back(c);
    return out;
  }

  Camera camera(const std::string& id) const {
    std::shared_lock lock(mu_);
    return require_camera_locked(id);
  }

  bool has_user(const std::string& id) const {
    std::shared_lock lock(mu_);
    return users_.contains(id);
  }

  std::vector<collab::CollaborationInterval> intervals(const std::string& camera_id) const {
    std::shared_lock lock(mu_);
    require_camera_locked(camera_id);
    auto it = intervals_.find(camera_id);
    return it == intervals_.end() ? std::vector<collab::CollaborationInterval>{} : it->second;
  }

  Revision revision() const {
    std::shared_lock lock(mu_);
    return revision_;
  }

  const ImageStore& images() const noexcept { return images_; }

 private:
  static constexpr std::int64_t kMaxTimestampMs = 253402300800000;  // year 10000

  const Camera& require_camera_locked(const std::string& id) const {
    auto it = cameras_.find(id);
    if (it == cameras_.end()) throw Error(ErrorCode::UnknownCamera, id);
    return it->second;
  }
  const Detector& require_detector_locked(const std::string& id) const {
    auto it = detectors_.find(id);
    if (it == detectors_.end()) throw Error(ErrorCode::UnknownDetector, id);
    return it->second;
  }
  const CaptureRecord& require_record_locked(RecordId id) const {
    auto it = records_.find(id);
    if (it == records_.end()) throw Error(ErrorCode::UnknownRecord, "record " + std::to_string(id));
    return *it->second;
  }
  void require_user_locked(const std::string& id) const {
    if (!users_.contains(id)) throw Error(ErrorCode::UnknownUser, id);
  }

  bool full_access_locked(const CaptureRecord& r, const std::string& user) const {
    return cameras_.at(r.camera_id).owner == user || r.contributors.contains(user);
  }
  bool visible_locked(const CaptureRecord& r, const std::string& user) const {
    return full_access_locked(r, user) || r.shared_with.contains(user);
  }

  bool in_interval_locked(const std::string& camera_id, Timestamp t) const {
    auto it = intervals_.find(camera_id);
    if (it == intervals_.end()) return false;
    return std::any_of(it->second.begin(), it->second.end(), [&](const auto& iv) { return contains_closed(iv, t); });
  }

  CameraAssignment assignment_locked(const std::string& camera_id) const {
    CameraAssignment a{camera_id, cameras_.at(camera_id).settings(), {}};
    std::vector<const ManualRequest*> pending;
    for (const auto& [id, r] : manual_)
      if (r.camera_id == camera_id && r.status == ManualStatus::Pending) pending.push_back(&r);
    std::sort(pending.begin(), pending.end(), [](auto* a, auto* b) {
      return a->requested != b->requested ? a->requested < b->requested : a->id < b->id;
    });
    for (auto* r : pending) a.manual_requests.push_back(r->id);
    return a;
  }

  // Callers hold the lock and an open transaction.
  void set_assignment_locked(const std::string& detector, const std::string& camera, bool removed) {
    const Revision rev = revision_ + 1;
    store_->put_assignment(detector, camera, rev, removed);
    store_->put_meta("revision", rev);
    revision_ = rev;
    assignments_[detector][camera] = {rev, removed};
  }

  void touch_camera_locked(const std::string& camera) {
    std::vector<std::string> holders;
    for (const auto& [det, cams] : assignments_) {
      auto it = cams.find(camera);
      if (it != cams.end() && !it->second.second) holders.push_back(det);
    }
    for (const auto& det : holders) set_assignment_locked(det, camera, false);
  }

  CaptureRecord commit_metadata_locked(CaptureRecord updated) {
    store_->transaction([&] { store_->put_record_metadata(updated); });
    records_[updated.id] = std::make_shared<const CaptureRecord>(updated);
    return updated;
  }

  mutable std::shared_mutex mu_;
  std::unique_ptr<Store> store_;
  ImageStore images_;
  Clock clock_;

  std::map<std::string, User> users_;
  std::map<std::string, Camera> cameras_;
  std::map<std::string, Detector> detectors_;
  std::map<std::string, std::map<std::string, std::pair<Revision, bool>>> assignments_;
  Revision revision_ = 0;
  std::map<RecordId, RecordPtr> records_;
  RecordId next_record_ = 1;
  std::map<std::string, std::vector<collab::CollaborationInterval>> intervals_;
  std::map<std::string, ManualRequest> manual_;
  std::int64_t next_request_ = 1;
};

}  // namespace reboard::coordinator
