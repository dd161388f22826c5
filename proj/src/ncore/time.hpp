#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace ncore {

// Seconds since the Unix epoch, UTC. Second granularity throughout: journal
// timestamps, object created/modified times, and OAI datestamps all share it.
using Timestamp = int64_t;

// "2026-08-19T12:00:00Z"
std::string format_rfc3339(Timestamp t);

// Accepts RFC3339 with 'Z' or '+00:00' offset; fractional seconds are truncated.
std::optional<Timestamp> parse_rfc3339(std::string_view s);

// OAI-PMH selective-harvest arguments come in either granularity.
// "2026-08-19" parses as midnight UTC.
std::optional<Timestamp> parse_oai_datestamp(std::string_view s);

// Injectable clock so replay-window and scheduling tests can steer time.
using Clock = std::function<Timestamp()>;

Timestamp system_now();

}  // namespace ncore
