#pragma once

#include "reboard/imaging/image.hpp"

namespace reboard::capture {

/// Anything that can hand out camera frames. `grab(at)` returns the frame
/// visible at time `at` (live sources ignore `at` and return the newest frame).
/// Implementations throw Error(SourceUnavailable) when the feed is gone.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual imaging::RawFrame grab(Timestamp at) = 0;
};

}  // namespace reboard::capture
