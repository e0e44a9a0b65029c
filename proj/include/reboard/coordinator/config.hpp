#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "reboard/coordinator/service.hpp"

namespace reboard::coordinator {

struct CameraEntry {
  Camera camera;
  std::optional<bool> capture_enabled;  // unset: keep whatever the database says
  std::string detector;                 // empty: leave assignments alone
};

/// Server configuration file, INI syntax:
///
///   [server]        host, port, database, images, admin_token
///   [users]         <user id> = <display name>
///   [detector.<id>] role
///   [camera.<id>]   owner, location, detector, corners ("x,y x,y x,y x,y",
///                   clockwise from top-left), aspect_ratio, capture_enabled,
///                   and calibration overrides named motion.<field>,
///                   collab.<field> or capture.<field> after the JSON bundle
struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path database = "reboard.db";
  std::filesystem::path images = "images";
  std::string admin_token;
  std::vector<User> users;
  std::vector<Detector> detectors;
  std::vector<CameraEntry> cameras;
};

namespace detail {

inline imaging::BoardGeometry parse_corners(const std::string& text, double aspect) {
  imaging::BoardGeometry g;
  g.aspect_ratio = aspect;
  std::istringstream in(text);
  std::string pt;
  int i = 0;
  while (in >> pt) {
    if (i == 4) throw Error(ErrorCode::InvalidArgument, "corners: more than four points");
    const auto comma = pt.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::InvalidArgument, "corners: expected x,y but got " + pt);
    try {
      g.corners[i] = {std::stod(pt.substr(0, comma)), std::stod(pt.substr(comma + 1))};
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "corners: bad number in " + pt);
    }
    ++i;
  }
  if (i != 4) throw Error(ErrorCode::InvalidArgument, "corners: need four points");
  return g;
}

/// Sets `bundle[section][field]` from text, converting to the type the field
/// already has.
inline void override_field(json& bundle, const std::string& key, const std::string& value) {
  const auto dot = key.find('.');
  const std::string section = key.substr(0, dot), field = key.substr(dot + 1);
  if (!bundle.contains(section) || !bundle[section].contains(field)) {
    throw Error(ErrorCode::InvalidArgument, "unknown camera setting " + key);
  }
  json& slot = bundle[section][field];
  try {
    std::size_t used = 0;
    if (slot.is_number_integer()) {
      slot = std::stoll(value, &used);
    } else if (slot.is_number()) {
      slot = std::stod(value, &used);
    } else {
      throw Error(ErrorCode::InvalidArgument, "setting " + key + " is not numeric");
    }
    if (used != value.size()) throw std::invalid_argument("trailing characters");
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "bad value '" + value + "' for " + key);
  }
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::InvalidArgument, "bad boolean '" + v + "' for " + key);
}

}  // namespace detail

inline ServerConfig parse_server_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  ServerConfig cfg;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  for (const auto& [name, section] : tree) {
    if (name == "server") {
      for (const auto& [key, v] : section) {
        const auto value = v.data();
        if (key == "host") {
          cfg.host = value;
        } else if (key == "port") {
          try {
            cfg.port = std::stoi(value);
          } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad port '" + value + "'");
          }
          if (cfg.port < 0 || cfg.port > 65535) throw Error(ErrorCode::InvalidArgument, "port out of range");
        } else if (key == "database") {
          cfg.database = value == ":memory:" ? std::filesystem::path(value) : resolve(value);
        } else if (key == "images") {
          cfg.images = resolve(value);
        } else if (key == "admin_token") {
          cfg.admin_token = value;
        } else {
          throw Error(ErrorCode::InvalidArgument, "unknown server setting " + key);
        }
      }
    } else if (name == "users") {
      for (const auto& [id, v] : section) cfg.users.push_back(User{id, v.data(), {}});
    } else if (name.starts_with("detector.")) {
      Detector d{name.substr(9), section.get<std::string>("role", "pipeline")};
      cfg.detectors.push_back(d);
    } else if (name.starts_with("camera.")) {
      CameraEntry e;
      e.camera.id = name.substr(7);
      json bundle = to_json(CameraConfig{});
      std::string corners;
      double aspect = 0.0;
      for (const auto& [key, v] : section) {
        const auto value = v.data();
        if (key == "owner") {
          e.camera.owner = value;
        } else if (key == "location") {
          e.camera.location = value;
        } else if (key == "detector") {
          e.detector = value;
        } else if (key == "corners") {
          corners = value;
        } else if (key == "aspect_ratio") {
          try {
            aspect = std::stod(value);
          } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad aspect_ratio '" + value + "'");
          }
        } else if (key == "capture_enabled") {
          e.capture_enabled = detail::parse_bool(value, key);
        } else if (key.find('.') != std::string::npos) {
          detail::override_field(bundle, key, value);
        } else {
          throw Error(ErrorCode::InvalidArgument, "unknown camera setting " + key);
        }
      }
      if (e.camera.owner.empty()) throw Error(ErrorCode::InvalidArgument, "camera " + e.camera.id + " has no owner");
      if (corners.empty() || aspect <= 0.0) {
        throw Error(ErrorCode::InvalidArgument, "camera " + e.camera.id + " needs corners and aspect_ratio");
      }
      e.camera.geometry = detail::parse_corners(corners, aspect);
      e.camera.config = camera_config_from_json(bundle);
      e.camera.settings().validate();
      cfg.cameras.push_back(std::move(e));
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown config section [" + name + "]");
    }
  }
  return cfg;
}

inline ServerConfig load_server_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  return parse_server_config(in, path.parent_path());
}

/// Brings the coordinator's registry in line with the file. Records and
/// intervals already stored are left alone.
inline void apply_config(Coordinator& c, const ServerConfig& cfg) {
  for (const auto& u : cfg.users) c.put_user(u);
  for (const auto& d : cfg.detectors) c.put_detector(d);
  for (const auto& e : cfg.cameras) {
    Camera cam = e.camera;
    std::optional<Camera> existing;
    try {
      existing = c.camera(cam.id);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::UnknownCamera) throw;
    }
    cam.capture_enabled = e.capture_enabled.value_or(existing ? existing->capture_enabled : true);
    if (!existing || !(*existing == cam)) c.put_camera(cam);
    if (!e.detector.empty()) c.assign(cam.id, e.detector);
  }
}

}  // namespace reboard::coordinator
