#pragma once

#include <bitset>
#include <optional>
#include <string>
#include <string_view>

#include "ncore/time.hpp"

namespace ncore {

// Five-field cron expression: minute hour day-of-month month day-of-week.
// Supports *, numbers, ranges, comma lists, and /step on any of those.
// Day-of-week 0 and 7 both mean Sunday. As in classic cron, when both
// day fields are restricted a match on either fires.
struct CronExpr {
  std::bitset<60> minute;
  std::bitset<24> hour;
  std::bitset<32> dom;    // 1..31
  std::bitset<13> month;  // 1..12
  std::bitset<7> dow;     // 0..6, Sunday = 0
  bool dom_restricted = false;
  bool dow_restricted = false;

  static std::optional<CronExpr> parse(std::string_view text);

  bool matches(Timestamp t) const;  // t truncated to the minute, UTC
  // First matching minute strictly after t; scans at most ~5 years.
  std::optional<Timestamp> next_after(Timestamp t) const;
};

}  // namespace ncore
