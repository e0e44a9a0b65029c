#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "reboard/capture/frame_source.hpp"
#include "reboard/imaging/png_io.hpp"

namespace reboard::feedsim {

namespace fs = std::filesystem;

struct ManifestEntry {
  std::string path;  // relative to the manifest directory
  Timestamp timestamp{};
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Recorded frame directory: "fps=<n>" header then "path<TAB>timestamp_ms" lines.
struct FrameManifest {
  double fps = 1.0;
  std::vector<ManifestEntry> entries;
  fs::path base_dir;

  void validate() const {
    if (!(fps > 0.0)) throw Error(ErrorCode::InvalidManifest, "fps must be positive");
    for (std::size_t i = 1; i < entries.size(); ++i) {
      if (!(entries[i].timestamp > entries[i - 1].timestamp)) {
        throw Error(ErrorCode::InvalidManifest, "timestamps must be strictly increasing (entry " +
                                                    std::to_string(i + 1) + ")");
      }
    }
  }

  fs::path resolve(const ManifestEntry& e) const { return base_dir / e.path; }
};

namespace detail {
inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}
}  // namespace detail

inline FrameManifest parse_manifest(std::string_view text, fs::path base_dir = {}) {
  FrameManifest m;
  m.base_dir = std::move(base_dir);
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  bool header = false;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::InvalidManifest, "manifest line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    if (!header) {
      const auto t = detail::trim(line);
      if (!t.starts_with("fps=")) fail("expected header 'fps=<n>'");
      const std::string v(t.substr(4));
      try {
        std::size_t used = 0;
        m.fps = std::stod(v, &used);
        if (used != v.size()) fail("bad fps value");
      } catch (const std::logic_error&) {
        fail("bad fps value");
      }
      header = true;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail("expected 'path<TAB>timestamp_ms'");
    const std::string_view path = detail::trim(std::string_view(line).substr(0, tab));
    const std::string_view ts = detail::trim(std::string_view(line).substr(tab + 1));
    long long ms = 0;
    const auto [p, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), ms);
    if (path.empty() || ec != std::errc{} || p != ts.data() + ts.size()) fail("malformed entry");
    m.entries.push_back({std::string(path), from_epoch_ms(ms)});
  }
  if (!header) throw Error(ErrorCode::InvalidManifest, "manifest is missing its 'fps=<n>' header");
  m.validate();
  return m;
}

inline FrameManifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

inline std::string format_manifest(const FrameManifest& m) {
  std::ostringstream out;
  out << "fps=" << m.fps << '\n';
  for (const auto& e : m.entries) out << e.path << '\t' << to_epoch_ms(e.timestamp) << '\n';
  return out.str();
}

inline imaging::RawFrame load_frame(const FrameManifest& m, const ManifestEntry& e) {
  return imaging::read_png(m.resolve(e), e.timestamp);
}

/// Sequential replay in manifest order, as fast as the consumer pulls.
class ManifestReplay {
 public:
  explicit ManifestReplay(FrameManifest m) : m_(std::move(m)) { m_.validate(); }

  std::optional<imaging::RawFrame> next() {
    if (pos_ >= m_.entries.size()) return std::nullopt;
    const auto& e = m_.entries[pos_++];
    return load_frame(m_, e);
  }
  std::size_t size() const noexcept { return m_.entries.size(); }
  const FrameManifest& manifest() const noexcept { return m_; }

 private:
  FrameManifest m_;
  std::size_t pos_ = 0;
};

/// Frame source over a recording: grab(at) returns the newest frame logged
/// at or before `at` (the first frame for earlier times).
class ManifestSource : public capture::FrameSource {
 public:
  explicit ManifestSource(FrameManifest m) : m_(std::move(m)) {
    m_.validate();
    if (m_.entries.empty()) throw Error(ErrorCode::InvalidManifest, "manifest has no frames");
  }

  imaging::RawFrame grab(Timestamp at) override {
    const auto it = std::upper_bound(m_.entries.begin(), m_.entries.end(), at,
                                     [](Timestamp t, const ManifestEntry& e) { return t < e.timestamp; });
    const std::size_t idx = it == m_.entries.begin() ? 0 : static_cast<std::size_t>(it - m_.entries.begin()) - 1;
    if (idx != cached_idx_) {
      cached_ = load_frame(m_, m_.entries[idx]);
      cached_idx_ = idx;
    }
    imaging::RawFrame f = cached_;
    f.timestamp = at;
    return f;
  }

 private:
  FrameManifest m_;
  std::size_t cached_idx_ = static_cast<std::size_t>(-1);
  imaging::RawFrame cached_;
};

}  // namespace reboard::feedsim
