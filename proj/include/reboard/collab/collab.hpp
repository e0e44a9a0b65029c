#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "reboard/motion/motion.hpp"

namespace reboard::collab {

using motion::MotionSample;

struct CollabConfig {
  Millis history_span{300'000};
  Millis evaluation_cadence{15'000};
  Millis start_window{150'000};
  double start_threshold = 1.8;  // mean persons to open an interval
  double end_threshold = 1.3;    // mean persons below which it closes

  void validate() const {
    if (evaluation_cadence <= Millis::zero() || start_window <= Millis::zero()) {
      throw Error(ErrorCode::InvalidArgument, "cadence and start window must be positive");
    }
    if (start_window > history_span) {
      throw Error(ErrorCode::InvalidArgument, "start_window must not exceed history_span");
    }
    if (!(end_threshold < start_threshold)) {
      throw Error(ErrorCode::InvalidArgument, "end_threshold must be below start_threshold");
    }
  }
  friend bool operator==(const CollabConfig&, const CollabConfig&) = default;
};

struct CollaborationInterval {
  std::string camera_id;
  Timestamp start{};
  Timestamp end{};

  friend bool operator==(const CollaborationInterval&, const CollaborationInterval&) = default;
};

/// Segments one camera's person-count stream into collaboration intervals.
///
/// Every `evaluation_cadence` (counted from the first sample) the detector
/// evaluates a windowed mean of person counts. While idle it looks at the last
/// `start_window`; once the mean exceeds `start_threshold` the tick time
/// becomes the interval start. While active it looks at the whole
/// `history_span` and closes the interval at the first tick whose mean falls
/// below `end_threshold`. Means are taken over the samples actually present.
class CollaborationDetector {
 public:
  CollaborationDetector(std::string camera_id, CollabConfig cfg)
      : camera_(std::move(camera_id)), cfg_(cfg) {
    cfg_.validate();
  }

  /// Adds a sample and runs every cadence tick up to and including its
  /// timestamp. Samples must arrive in non-decreasing time order.
  std::vector<CollaborationInterval> feed(const MotionSample& s) {
    if (!origin_) {
      origin_ = s.timestamp;
      next_tick_ = s.timestamp + cfg_.evaluation_cadence;
    } else if (s.timestamp < last_seen_) {
      throw Error(ErrorCode::InvalidArgument, "motion samples out of order");
    }
    last_seen_ = s.timestamp;
    history_.push_back({s.timestamp, s.person_count});
    return run_ticks_through(s.timestamp);
  }

  /// One evaluation at `now` over the retained samples with timestamp <= now.
  std::optional<CollaborationInterval> step(Timestamp now) {
    while (!history_.empty() && history_.front().t <= now - cfg_.history_span) history_.pop_front();
    if (!active_) {
      if (mean_over(now, cfg_.start_window) > cfg_.start_threshold) {
        active_ = true;
        start_ = now;
      }
      return std::nullopt;
    }
    if (mean_over(now, cfg_.history_span) < cfg_.end_threshold) {
      active_ = false;
      return CollaborationInterval{camera_, start_, now};
    }
    return std::nullopt;
  }

  /// End of stream: runs outstanding ticks, then closes an open interval at
  /// `now`.
  std::vector<CollaborationInterval> flush(Timestamp now) {
    std::vector<CollaborationInterval> out;
    if (origin_) out = run_ticks_through(now);
    if (active_) {
      active_ = false;
      if (start_ < now) out.push_back({camera_, start_, now});
    }
    return out;
  }

  bool active() const noexcept { return active_; }
  std::optional<Timestamp> active_since() const {
    return active_ ? std::optional<Timestamp>(start_) : std::nullopt;
  }
  Timestamp last_sample_time() const noexcept { return last_seen_; }
  const CollabConfig& config() const noexcept { return cfg_; }

 private:
  struct Entry {
    Timestamp t;
    int persons;
  };

  std::vector<CollaborationInterval> run_ticks_through(Timestamp t) {
    std::vector<CollaborationInterval> out;
    while (next_tick_ <= t) {
      if (auto iv = step(next_tick_)) out.push_back(*iv);
      next_tick_ += cfg_.evaluation_cadence;
    }
    return out;
  }

  double mean_over(Timestamp now, Millis window) const {
    long long sum = 0;
    long long n = 0;
    for (const auto& e : history_) {
      if (e.t > now) break;
      if (e.t > now - window) {
        sum += e.persons;
        ++n;
      }
    }
    return n == 0 ? 0.0 : static_cast<double>(sum) / static_cast<double>(n);
  }

  std::string camera_;
  CollabConfig cfg_;
  std::deque<Entry> history_;
  std::optional<Timestamp> origin_;
  Timestamp next_tick_{};
  Timestamp last_seen_{};
  bool active_ = false;
  Timestamp start_{};
};

}  // namespace reboard::collab
