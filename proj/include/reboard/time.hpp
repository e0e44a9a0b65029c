#pragma once

#include <chrono>
#include <cstdint>

namespace reboard {

using Millis = std::chrono::milliseconds;
/// Milliseconds since the Unix epoch, UTC.
using Timestamp = std::chrono::sys_time<Millis>;

constexpr Timestamp from_epoch_ms(std::int64_t ms) noexcept { return Timestamp{Millis{ms}}; }
constexpr std::int64_t to_epoch_ms(Timestamp t) noexcept { return t.time_since_epoch().count(); }

}  // namespace reboard
