#pragma once

#include <charconv>
#include <string>
#include <utility>

#include "json.hpp"
#include "reboard/coordinator/codec.hpp"
#include "reboard/coordinator/service.hpp"
#include "reboard/retrieval/retrieval.hpp"

// After the library headers: <resolv.h> defines a `_res` macro that breaks Eigen.
#include "httplib.h"

namespace reboard::coordinator {

inline int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownDetector:
    case ErrorCode::UnknownCamera:
    case ErrorCode::UnknownRecord:
    case ErrorCode::UnknownUser:
    case ErrorCode::MissingFile: return 404;
    case ErrorCode::NotOwner:
    case ErrorCode::NotAuthorized: return 403;
    case ErrorCode::CaptureDisabled:
    case ErrorCode::Conflict: return 409;
    case ErrorCode::StorageFailure:
    case ErrorCode::SourceUnavailable: return 500;
    default: return 400;
  }
}

struct HttpOptions {
  std::string admin_token;  // empty: admin routes need no token
};

/// JSON API in front of a Coordinator. User routes identify the caller by
/// the X-User header; detector routes carry no identity.
class HttpServer {
 public:
  explicit HttpServer(Coordinator& coord, HttpOptions opts = {}) : coord_(coord), opts_(std::move(opts)) { routes(); }

  /// Binds without serving yet; port 0 picks a free port. Returns the port.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      port = server_.bind_to_any_port(host);
      if (port < 0) throw Error(ErrorCode::StorageFailure, "cannot bind " + host);
    } else if (!server_.bind_to_port(host, port)) {
      throw Error(ErrorCode::StorageFailure, "cannot bind " + host + ":" + std::to_string(port));
    }
    port_ = port;
    return port;
  }

  /// Serves until stop() is called.
  void listen() {
    if (!server_.listen_after_bind()) throw Error(ErrorCode::StorageFailure, "server stopped unexpectedly");
  }

  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  int port() const noexcept { return port_; }
  httplib::Server& raw() noexcept { return server_; }

 private:
  using Request = httplib::Request;
  using Response = httplib::Response;
  using json = nlohmann::json;

  struct HttpError {
    int status;
    std::string code;
    std::string message;
  };

  static void send(Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(Response& res, int status, const std::string& code, const std::string& message) {
    send(res, status, {{"error", code}, {"message", message}});
  }

  template <class F>
  static httplib::Server::Handler guarded(F f) {
    return [f = std::move(f)](const Request& req, Response& res) {
      try {
        f(req, res);
      } catch (const HttpError& e) {
        send_error(res, e.status, e.code, e.message);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, "InvalidArgument", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
      }
    };
  }

  std::string user(const Request& req) const {
    const auto u = req.get_header_value("X-User");
    if (u.empty() || !coord_.has_user(u)) throw HttpError{401, "Unauthenticated", "missing or unknown X-User"};
    return u;
  }

  void admin(const Request& req) const {
    if (!opts_.admin_token.empty() && req.get_header_value("X-Admin-Token") != opts_.admin_token) {
      throw HttpError{403, "NotAuthorized", "admin token required"};
    }
  }

  static json body(const Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
  }

  static RecordId record_id(const Request& req) {
    RecordId id = 0;
    const auto& s = req.matches[1].str();
    auto r = std::from_chars(s.data(), s.data() + s.size(), id);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw Error(ErrorCode::UnknownRecord, s);
    return id;
  }

  static std::string param(const Request& req, const std::string& key, const std::string& fallback = {}) {
    return req.has_param(key) ? req.get_param_value(key) : fallback;
  }

  static std::int64_t int_param(const Request& req, const std::string& key, std::int64_t fallback) {
    if (!req.has_param(key)) return fallback;
    const auto s = req.get_param_value(key);
    std::int64_t v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      throw Error(ErrorCode::InvalidArgument, "parameter " + key + " must be an integer");
    }
    return v;
  }

  json summary_for(const CaptureRecord& r, const std::string& viewer) const {
    return record_summary(r, coord_.full_access(r, viewer), viewer);
  }

  void routes() {
    auto& s = server_;
    const std::string id = "([A-Za-z0-9._~-]+)";

    s.Get("/health", guarded([this](const Request&, Response& res) {
      send(res, 200, {{"status", "ok"}, {"revision", coord_.revision()}});
    }));

    // ---- detectors -----------------------------------------------------------

    s.Post("/events/capture", guarded([this](const Request& req, Response& res) {
      const auto rec = coord_.ingest_capture(capture_event_from_json(body(req)));
      send(res, 201, record_summary(rec, true, {}));
    }));

    s.Post("/events/collaboration", guarded([this](const Request& req, Response& res) {
      send(res, 200, {{"upgraded", coord_.ingest_collaboration(interval_from_json(body(req)))}});
    }));

    s.Post("/events/manual-capture-failed", guarded([this](const Request& req, Response& res) {
      const auto j = body(req);
      coord_.fail_manual_capture(j.at("camera_id").get<std::string>(), j.at("request_id").get<std::string>(),
                                 j.value("reason", std::string()));
      res.status = 204;
    }));

    s.Get("/assignments/" + id, guarded([this](const Request& req, Response& res) {
      send(res, 200, to_json(coord_.poll_assignments(req.matches[1].str(), int_param(req, "since", 0))));
    }));

    // ---- captures ------------------------------------------------------------

    s.Get("/captures", guarded([this](const Request& req, Response& res) {
      const auto ctx = retrieval::from_params(req.params, user(req));
      json records = json::array();
      for (const auto& r : retrieval::summary(coord_, ctx)) records.push_back(summary_for(*r, ctx.user));
      send(res, 200, {{"context", retrieval::to_query(ctx)}, {"records", records}});
    }));

    s.Get(R"(/captures/(\d+))", guarded([this](const Request& req, Response& res) {
      const auto u = user(req);
      send(res, 200, summary_for(*coord_.record(record_id(req), u), u));
    }));

    s.Get(R"(/captures/(\d+)/image)", guarded([this](const Request& req, Response& res) {
      const auto png = coord_.image_png(record_id(req), user(req));
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    }));

    s.Post(R"(/captures/(\d+)/share)", guarded([this](const Request& req, Response& res) {
      const auto u = user(req);
      const auto j = body(req);
      const auto targets = parse_guard("share request", [&] { return j.at("targets").get<std::set<std::string>>(); });
      std::optional<imaging::Rect> region;
      if (j.contains("region") && !j["region"].is_null()) region = rect_from_json(j["region"]);
      send(res, 200, summary_for(coord_.share(record_id(req), u, targets, region), u));
    }));

    s.Patch(R"(/captures/(\d+)/metadata)", guarded([this](const Request& req, Response& res) {
      const auto u = user(req);
      send(res, 200, summary_for(coord_.set_metadata(record_id(req), u, metadata_patch_from_json(body(req))), u));
    }));

    // ---- cameras ---------------------------------------------------------------

    s.Get("/cameras", guarded([this](const Request& req, Response& res) {
      user(req);
      json out = json::array();
      for (const auto& c : coord_.cameras()) out.push_back(to_json(c));
      send(res, 200, out);
    }));

    s.Get("/users", guarded([this](const Request& req, Response& res) {
      user(req);
      json out = json::array();
      for (const auto& u : coord_.users()) out.push_back(to_json(u));
      send(res, 200, out);
    }));

    s.Post("/cameras/" + id + "/manual-capture", guarded([this](const Request& req, Response& res) {
      const auto r = coord_.request_manual_capture(req.matches[1].str(), user(req));
      res.set_header("Location", "/manual-captures/" + r.id);
      send(res, 202, to_json(r));
    }));

    s.Get("/manual-captures/" + id, guarded([this](const Request& req, Response& res) {
      send(res, 200, to_json(coord_.manual_request(req.matches[1].str(), user(req))));
    }));

    s.Put("/cameras/" + id + "/capture-enabled", guarded([this](const Request& req, Response& res) {
      const auto j = body(req);
      const bool on = parse_guard("capture-enabled request", [&] { return j.at("enabled").get<bool>(); });
      const auto cam = req.matches[1].str();
      coord_.set_capture_enabled(cam, user(req), on);
      send(res, 200, {{"camera_id", cam}, {"capture_enabled", coord_.camera(cam).capture_enabled}});
    }));

    // ---- views -----------------------------------------------------------------

    s.Get("/views/calendar", guarded([this](const Request& req, Response& res) {
      const auto ctx = retrieval::from_params(req.params, user(req));
      const auto month = retrieval::parse_month(param(req, "month"));
      const auto months = int_param(req, "months", 1);
      if (months < 1 || months > 120) throw Error(ErrorCode::MalformedRange, "months must be in [1, 120]");
      json days = json::array();
      for (const auto& d : retrieval::calendar(coord_, ctx, month, static_cast<int>(months)))
        days.push_back(retrieval::to_json(d));
      send(res, 200, {{"context", retrieval::to_query(ctx)}, {"days", days}});
    }));

    s.Get("/views/timeline", guarded([this](const Request& req, Response& res) {
      const auto ctx = retrieval::from_params(req.params, user(req));
      json bars = json::array();
      for (const auto& b : retrieval::timeline(coord_, ctx)) bars.push_back(retrieval::to_json(b));
      send(res, 200, {{"context", retrieval::to_query(ctx)}, {"bars", bars}});
    }));

    s.Get("/views/heatmap", guarded([this](const Request& req, Response& res) {
      const auto ctx = retrieval::from_params(req.params, user(req));
      auto out = retrieval::to_json(retrieval::heatmap(coord_, ctx));
      out["context"] = retrieval::to_query(ctx);
      send(res, 200, out);
    }));

    // Heatmap rectangle selection: `select=c0,r0,c1,r1` on the camera's coarse
    // grid, answered with the narrowed context.
    s.Get("/views/region-select", guarded([this](const Request& req, Response& res) {
      auto params = req.params;
      params.erase("select");
      const auto ctx = retrieval::from_params(params, user(req));
      if (ctx.cameras.size() != 1) throw Error(ErrorCode::NoCameraSelected, "region selection needs one camera");
      const auto sel = retrieval::detail::split(param(req, "select"), ',');
      if (sel.size() != 4) throw Error(ErrorCode::EmptySelection, "select needs c0,r0,c1,r1");
      CellRect cells{};
      int* slots[] = {&cells.c0, &cells.r0, &cells.c1, &cells.r1};
      for (int i = 0; i < 4; ++i) *slots[i] = retrieval::detail::parse_number<int>(sel[i], "select");
      const auto cols = imaging::coarse_columns(coord_.camera(*ctx.cameras.begin()).geometry.aspect_ratio);
      send(res, 200, {{"context", retrieval::to_query(retrieval::region_select(ctx, cells, cols))}});
    }));

    // ---- admin -----------------------------------------------------------------

    s.Put("/admin/users/" + id, guarded([this](const Request& req, Response& res) {
      admin(req);
      const auto j = body(req);
      User u{req.matches[1].str(), j.value("display_name", req.matches[1].str()), j.value("credentials", std::string())};
      coord_.put_user(u);
      send(res, 200, to_json(u));
    }));

    s.Put("/admin/detectors/" + id, guarded([this](const Request& req, Response& res) {
      admin(req);
      const auto j = body(req);
      Detector d{req.matches[1].str(), j.value("role", std::string("pipeline"))};
      coord_.put_detector(d);
      send(res, 200, {{"id", d.id}, {"role", d.role}});
    }));

    s.Put("/admin/cameras/" + id, guarded([this](const Request& req, Response& res) {
      admin(req);
      const auto cam = camera_from_request(req.matches[1].str(), body(req));
      coord_.put_camera(cam);
      send(res, 200, to_json(coord_.camera(cam.id)));
    }));

    s.Put("/admin/assignments/" + id, guarded([this](const Request& req, Response& res) {
      admin(req);
      const auto j = body(req);
      const auto det = parse_guard("assignment", [&] { return j.at("detector_id").get<std::string>(); });
      coord_.assign(req.matches[1].str(), det);
      send(res, 200, {{"camera_id", req.matches[1].str()}, {"detector_id", det}, {"revision", coord_.revision()}});
    }));

    s.Delete("/admin/assignments/" + id + "/" + id, guarded([this](const Request& req, Response& res) {
      admin(req);
      coord_.unassign(req.matches[1].str(), req.matches[2].str());
      res.status = 204;
    }));
  }

  /// Full or partial camera definition; fields absent from the body keep
  /// their current values, and config sections merge key by key.
  Camera camera_from_request(const std::string& camera_id, const json& j) const {
    std::optional<Camera> existing;
    try {
      existing = coord_.camera(camera_id);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnknownCamera) throw;
    }
    return parse_guard("camera", [&] {
      Camera c = existing.value_or(Camera{});
      c.id = camera_id;
      if (j.contains("owner")) c.owner = j["owner"].get<std::string>();
      if (j.contains("location")) c.location = j["location"].get<std::string>();
      if (j.contains("capture_enabled")) c.capture_enabled = j["capture_enabled"].get<bool>();
      if (j.contains("geometry")) {
        c.geometry = feedsim::geometry_from_json(j["geometry"]);
      } else if (!existing) {
        throw Error(ErrorCode::InvalidArgument, "new camera needs a geometry");
      }
      if (j.contains("config")) {
        json merged = to_json(c.config);
        merged.merge_patch(j["config"]);
        c.config = camera_config_from_json(merged);
      }
      if (c.owner.empty()) throw Error(ErrorCode::InvalidArgument, "camera needs an owner");
      c.settings().validate();
      return c;
    });
  }

  Coordinator& coord_;
  HttpOptions opts_;
  httplib::Server server_;
  int port_ = 0;
};

}  // namespace reboard::coordinator
