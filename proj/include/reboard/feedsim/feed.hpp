#pragma once

#include <optional>
#include <vector>

#include "reboard/feedsim/generator.hpp"
#include "reboard/feedsim/manifest.hpp"

namespace reboard::feedsim {

/// A frame stream plus a source the capture detector can grab bursts from.
class FrameFeed {
 public:
  virtual ~FrameFeed() = default;
  virtual std::optional<imaging::RawFrame> next() = 0;
  virtual capture::FrameSource& bursts() = 0;
};

class ScenarioFeed : public FrameFeed {
 public:
  explicit ScenarioFeed(const feedsim::Scenario& sc) : renderer_(sc), times_(renderer_.frame_times()) {}
  std::optional<imaging::RawFrame> next() override {
    if (pos_ >= times_.size()) return std::nullopt;
    return renderer_.grab(times_[pos_++]);
  }
  capture::FrameSource& bursts() override { return renderer_; }

 private:
  feedsim::SceneRenderer renderer_;
  std::vector<Timestamp> times_;
  std::size_t pos_ = 0;
};

class ManifestFeed : public FrameFeed {
 public:
  explicit ManifestFeed(const feedsim::FrameManifest& m) : replay_(m), source_(m) {}
  std::optional<imaging::RawFrame> next() override { return replay_.next(); }
  capture::FrameSource& bursts() override { return source_; }

 private:
  feedsim::ManifestReplay replay_;
  feedsim::ManifestSource source_;
};

}  // namespace reboard::feedsim
