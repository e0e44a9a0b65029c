#pragma once

#include <sqlite3.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "reboard/coordinator/codec.hpp"
#include "reboard/coordinator/types.hpp"

namespace reboard::coordinator {

namespace sql {

class Statement {
 public:
  Statement(sqlite3* db, const char* text) : db_(db) {
    if (sqlite3_prepare_v2(db, text, -1, &stmt_, nullptr) != SQLITE_OK) fail("prepare");
  }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;
  ~Statement() { sqlite3_finalize(stmt_); }

  Statement& bind(int i, const std::string& v) {
    check(sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
    return *this;
  }
  Statement& bind(int i, std::int64_t v) {
    check(sqlite3_bind_int64(stmt_, i, v));
    return *this;
  }
  Statement& bind(int i, int v) { return bind(i, static_cast<std::int64_t>(v)); }
  Statement& bind(int i, bool v) { return bind(i, static_cast<std::int64_t>(v ? 1 : 0)); }
  Statement& bind(int i, double v) {
    check(sqlite3_bind_double(stmt_, i, v));
    return *this;
  }
  Statement& bind_null(int i) {
    check(sqlite3_bind_null(stmt_, i));
    return *this;
  }

  /// True while rows remain.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    fail("step");
  }
  void run() {
    while (step()) {
    }
  }

  std::string text(int col) const {
    const auto* p = sqlite3_column_text(stmt_, col);
    return p ? std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
             : std::string();
  }
  std::int64_t i64(int col) const { return sqlite3_column_int64(stmt_, col); }
  double real(int col) const { return sqlite3_column_double(stmt_, col); }
  bool is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }

 private:
  void check(int rc) {
    if (rc != SQLITE_OK) fail("bind");
  }
  [[noreturn]] void fail(const char* what) {
    throw Error(ErrorCode::StorageFailure, std::string("sqlite ") + what + ": " + sqlite3_errmsg(db_));
  }

  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

}  // namespace sql

/// Everything the coordinator keeps, as loaded from disk.
struct StoredState {
  std::map<std::string, User> users;
  std::map<std::string, Camera> cameras;
  std::map<std::string, Detector> detectors;
  // detector -> camera -> (revision of last change, removed?)
  std::map<std::string, std::map<std::string, std::pair<Revision, bool>>> assignments;
  Revision revision = 0;
  std::map<RecordId, CaptureRecord> records;
  std::vector<collab::CollaborationInterval> intervals;
  std::map<std::string, ManualRequest> manual_requests;
  std::int64_t next_request = 1;
};

/// Relational mirror of the coordinator state. Every mutation is written here
/// before the in-memory model changes.
class Store {
 public:
  explicit Store(const std::string& path = ":memory:") {
    if (path != ":memory:") {
      const auto parent = std::filesystem::path(path).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
    }
    if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK) {
      std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
      sqlite3_close(db_);
      throw Error(ErrorCode::StorageFailure, "cannot open database " + path + ": " + msg);
    }
    sqlite3_busy_timeout(db_, 5000);
    exec("PRAGMA foreign_keys = ON");
    exec(kSchema);
  }
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;
  ~Store() { sqlite3_close(db_); }

  void exec(const char* text) {
    char* err = nullptr;
    if (sqlite3_exec(db_, text, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown error";
      sqlite3_free(err);
      throw Error(ErrorCode::StorageFailure, "sqlite: " + msg);
    }
  }

  /// Runs `f` inside a transaction; rolls back if it throws.
  template <class F>
  void transaction(F&& f) {
    exec("BEGIN IMMEDIATE");
    try {
      f();
      exec("COMMIT");
    } catch (...) {
      sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
      throw;
    }
  }

  void put_user(const User& u) {
    sql::Statement(db_, "INSERT OR REPLACE INTO users(id, display_name, credentials) VALUES(?,?,?)")
        .bind(1, u.id).bind(2, u.display_name).bind(3, u.credentials).run();
  }

  void put_camera(const Camera& c) {
    sql::Statement(db_,
                   "INSERT OR REPLACE INTO cameras(id, owner, location, geometry, config, capture_enabled) "
                   "VALUES(?,?,?,?,?,?)")
        .bind(1, c.id).bind(2, c.owner).bind(3, c.location)
        .bind(4, feedsim::geometry_to_json(c.geometry).dump()).bind(5, to_json(c.config).dump())
        .bind(6, c.capture_enabled).run();
  }

  void put_detector(const Detector& d) {
    sql::Statement(db_, "INSERT OR REPLACE INTO detectors(id, role) VALUES(?,?)").bind(1, d.id).bind(2, d.role).run();
  }

  void put_assignment(const std::string& detector, const std::string& camera, Revision rev, bool removed) {
    sql::Statement(db_,
                   "INSERT OR REPLACE INTO assignments(detector_id, camera_id, revision, removed) VALUES(?,?,?,?)")
        .bind(1, detector).bind(2, camera).bind(3, rev).bind(4, removed).run();
  }

  void put_meta(const std::string& key, std::int64_t value) {
    sql::Statement(db_, "INSERT OR REPLACE INTO meta(key, value) VALUES(?,?)").bind(1, key).bind(2, value).run();
  }

  /// Inserts or rewrites a record with its shares, contributors and tags.
  void put_record(const CaptureRecord& r) {
    sql::Statement(db_,
                   "INSERT OR REPLACE INTO records(id, camera_id, ts_ms, image_ref, width, height, trigger, "
                   "request_id, grids, cell_tolerance, changed_cell_count, content_type, bookmarked, label, "
                   "description) VALUES(?,?,?,?,?,?,?,?,?,?,?,?,?,?,?)")
        .bind(1, r.id).bind(2, r.camera_id).bind(3, to_epoch_ms(r.timestamp)).bind(4, r.image_ref)
        .bind(5, r.width).bind(6, r.height).bind(7, std::string(to_string(r.trigger))).bind(8, r.request_id)
        .bind(9, to_json(r.grids).dump()).bind(10, r.cell_tolerance).bind(11, r.changed_cell_count)
        .bind(12, std::string(to_string(r.content_type))).bind(13, r.bookmarked).bind(14, r.label)
        .bind(15, r.description).run();
    put_record_metadata(r);
  }

  /// Rewrites only the mutable columns and child rows.
  void put_record_metadata(const CaptureRecord& r) {
    sql::Statement(db_, "UPDATE records SET content_type=?, bookmarked=?, label=?, description=? WHERE id=?")
        .bind(1, std::string(to_string(r.content_type))).bind(2, r.bookmarked).bind(3, r.label)
        .bind(4, r.description).bind(5, r.id).run();
    for (const char* table : {"record_shares", "record_contributors", "record_tags"}) {
      sql::Statement(db_, (std::string("DELETE FROM ") + table + " WHERE record_id=?").c_str()).bind(1, r.id).run();
    }
    for (const auto& [user, crop] : r.shared_with) {
      sql::Statement s(db_, "INSERT INTO record_shares(record_id, user_id, x, y, w, h) VALUES(?,?,?,?,?,?)");
      s.bind(1, r.id).bind(2, user);
      if (crop) {
        s.bind(3, crop->x).bind(4, crop->y).bind(5, crop->w).bind(6, crop->h);
      } else {
        s.bind_null(3).bind_null(4).bind_null(5).bind_null(6);
      }
      s.run();
    }
    for (const auto& u : r.contributors) {
      sql::Statement(db_, "INSERT INTO record_contributors(record_id, user_id) VALUES(?,?)").bind(1, r.id).bind(2, u).run();
    }
    for (const auto& t : r.tags) {
      sql::Statement(db_, "INSERT INTO record_tags(record_id, tag) VALUES(?,?)").bind(1, r.id).bind(2, t).run();
    }
  }

  void set_content_type(RecordId id, ContentType c) {
    sql::Statement(db_, "UPDATE records SET content_type=? WHERE id=?")
        .bind(1, std::string(to_string(c))).bind(2, id).run();
  }

  void put_interval(const collab::CollaborationInterval& iv) {
    sql::Statement(db_, "INSERT OR IGNORE INTO intervals(camera_id, start_ms, end_ms) VALUES(?,?,?)")
        .bind(1, iv.camera_id).bind(2, to_epoch_ms(iv.start)).bind(3, to_epoch_ms(iv.end)).run();
  }

  void put_manual_request(const ManualRequest& r) {
    sql::Statement s(db_,
                     "INSERT OR REPLACE INTO manual_requests(id, camera_id, requested_ms, status, record_id, reason) "
                     "VALUES(?,?,?,?,?,?)");
    s.bind(1, r.id).bind(2, r.camera_id).bind(3, to_epoch_ms(r.requested)).bind(4, std::string(to_string(r.status)));
    if (r.record) {
      s.bind(5, *r.record);
    } else {
      s.bind_null(5);
    }
    s.bind(6, r.reason).run();
  }

  StoredState load() {
    StoredState st;
    {
      sql::Statement s(db_, "SELECT id, display_name, credentials FROM users");
      while (s.step()) st.users[s.text(0)] = User{s.text(0), s.text(1), s.text(2)};
    }
    {
      sql::Statement s(db_, "SELECT id, owner, location, geometry, config, capture_enabled FROM cameras");
      while (s.step()) {
        Camera c;
        c.id = s.text(0);
        c.owner = s.text(1);
        c.location = s.text(2);
        c.geometry = parse_guard("stored geometry", [&] { return feedsim::geometry_from_json(json::parse(s.text(3))); });
        c.config = camera_config_from_json(json::parse(s.text(4)));
        c.capture_enabled = s.i64(5) != 0;
        st.cameras[c.id] = std::move(c);
      }
    }
    {
      sql::Statement s(db_, "SELECT id, role FROM detectors");
      while (s.step()) st.detectors[s.text(0)] = Detector{s.text(0), s.text(1)};
    }
    {
      sql::Statement s(db_, "SELECT detector_id, camera_id, revision, removed FROM assignments");
      while (s.step()) st.assignments[s.text(0)][s.text(1)] = {s.i64(2), s.i64(3) != 0};
    }
    {
      sql::Statement s(db_, "SELECT key, value FROM meta");
      while (s.step()) {
        if (s.text(0) == "revision") st.revision = s.i64(1);
        if (s.text(0) == "next_request") st.next_request = s.i64(1);
      }
    }
    {
      sql::Statement s(db_,
                       "SELECT id, camera_id, ts_ms, image_ref, width, height, trigger, request_id, grids, "
                       "cell_tolerance, changed_cell_count, content_type, bookmarked, label, description FROM records");
      while (s.step()) {
        CaptureRecord r;
        r.id = s.i64(0);
        r.camera_id = s.text(1);
        r.timestamp = from_epoch_ms(s.i64(2));
        r.image_ref = s.text(3);
        r.width = static_cast<int>(s.i64(4));
        r.height = static_cast<int>(s.i64(5));
        r.trigger = s.text(6) == "manual" ? capture::Trigger::Manual : capture::Trigger::Automatic;
        r.request_id = s.text(7);
        r.grids = grids_from_json(json::parse(s.text(8)));
        r.cell_tolerance = s.real(9);
        r.changed_cell_count = static_cast<int>(s.i64(10));
        r.content_type = parse_content_type(s.text(11));
        r.bookmarked = s.i64(12) != 0;
        r.label = s.text(13);
        r.description = s.text(14);
        st.records[r.id] = std::move(r);
      }
    }
    {
      sql::Statement s(db_, "SELECT record_id, user_id, x, y, w, h FROM record_shares");
      while (s.step()) {
        std::optional<imaging::Rect> crop;
        if (!s.is_null(2)) {
          crop = imaging::Rect{static_cast<int>(s.i64(2)), static_cast<int>(s.i64(3)), static_cast<int>(s.i64(4)),
                               static_cast<int>(s.i64(5))};
        }
        st.records.at(s.i64(0)).shared_with[s.text(1)] = crop;
      }
    }
    {
      sql::Statement s(db_, "SELECT record_id, user_id FROM record_contributors");
      while (s.step()) st.records.at(s.i64(0)).contributors.insert(s.text(1));
    }
    {
      sql::Statement s(db_, "SELECT record_id, tag FROM record_tags");
      while (s.step()) st.records.at(s.i64(0)).tags.insert(s.text(1));
    }
    {
      sql::Statement s(db_, "SELECT camera_id, start_ms, end_ms FROM intervals ORDER BY camera_id, start_ms");
      while (s.step()) st.intervals.push_back({s.text(0), from_epoch_ms(s.i64(1)), from_epoch_ms(s.i64(2))});
    }
    {
      sql::Statement s(db_, "SELECT id, camera_id, requested_ms, status, record_id, reason FROM manual_requests");
      while (s.step()) {
        ManualRequest r;
        r.id = s.text(0);
        r.camera_id = s.text(1);
        r.requested = from_epoch_ms(s.i64(2));
        const auto status = s.text(3);
        r.status = status == "done" ? ManualStatus::Done : status == "failed" ? ManualStatus::Failed : ManualStatus::Pending;
        if (!s.is_null(4)) r.record = s.i64(4);
        r.reason = s.text(5);
        st.manual_requests[r.id] = std::move(r);
      }
    }
    return st;
  }

 private:
  static constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS meta(key TEXT PRIMARY KEY, value INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS users(
  id TEXT PRIMARY KEY, display_name TEXT NOT NULL, credentials TEXT NOT NULL DEFAULT '');
CREATE TABLE IF NOT EXISTS cameras(
  id TEXT PRIMARY KEY, owner TEXT NOT NULL REFERENCES users(id), location TEXT NOT NULL,
  geometry TEXT NOT NULL, config TEXT NOT NULL, capture_enabled INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS detectors(id TEXT PRIMARY KEY, role TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS assignments(
  detector_id TEXT NOT NULL REFERENCES detectors(id), camera_id TEXT NOT NULL REFERENCES cameras(id),
  revision INTEGER NOT NULL, removed INTEGER NOT NULL, PRIMARY KEY(detector_id, camera_id));
CREATE TABLE IF NOT EXISTS records(
  id INTEGER PRIMARY KEY, camera_id TEXT NOT NULL REFERENCES cameras(id), ts_ms INTEGER NOT NULL,
  image_ref TEXT NOT NULL, width INTEGER NOT NULL, height INTEGER NOT NULL, trigger TEXT NOT NULL,
  request_id TEXT NOT NULL, grids TEXT NOT NULL, cell_tolerance REAL NOT NULL,
  changed_cell_count INTEGER NOT NULL, content_type TEXT NOT NULL, bookmarked INTEGER NOT NULL,
  label TEXT NOT NULL, description TEXT NOT NULL);
CREATE INDEX IF NOT EXISTS records_by_camera_time ON records(camera_id, ts_ms);
CREATE TABLE IF NOT EXISTS record_shares(
  record_id INTEGER NOT NULL REFERENCES records(id), user_id TEXT NOT NULL REFERENCES users(id),
  x INTEGER, y INTEGER, w INTEGER, h INTEGER, PRIMARY KEY(record_id, user_id));
CREATE TABLE IF NOT EXISTS record_contributors(
  record_id INTEGER NOT NULL REFERENCES records(id), user_id TEXT NOT NULL REFERENCES users(id),
  PRIMARY KEY(record_id, user_id));
CREATE TABLE IF NOT EXISTS record_tags(
  record_id INTEGER NOT NULL REFERENCES records(id), tag TEXT NOT NULL, PRIMARY KEY(record_id, tag));
CREATE TABLE IF NOT EXISTS intervals(
  camera_id TEXT NOT NULL REFERENCES cameras(id), start_ms INTEGER NOT NULL, end_ms INTEGER NOT NULL,
  PRIMARY KEY(camera_id, start_ms, end_ms));
CREATE TABLE IF NOT EXISTS manual_requests(
  id TEXT PRIMARY KEY, camera_id TEXT NOT NULL REFERENCES cameras(id), requested_ms INTEGER NOT NULL,
  status TEXT NOT NULL, record_id INTEGER, reason TEXT NOT NULL DEFAULT '');
)sql";

  sqlite3* db_ = nullptr;
};

}  // namespace reboard::coordinator
