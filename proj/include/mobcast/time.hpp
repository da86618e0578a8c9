#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace mobcast {

using TimePoint = std::chrono::sys_seconds;
using UtcOffset = std::chrono::minutes;

struct ParsedTime {
  TimePoint instant;
  UtcOffset offset{0};
};

// "2012-04-03T18:00:00Z", "2012-04-03T18:00:00.250+09:00". Fractional
// seconds are accepted and dropped.
std::optional<ParsedTime> parse_rfc3339(std::string_view text);

// Raw Foursquare global check-in format: "Tue Apr 03 18:00:09 +0000 2012".
std::optional<ParsedTime> parse_foursquare_time(std::string_view text);

// Either of the above.
std::optional<ParsedTime> parse_timestamp(std::string_view text);

// "+08:00", "-05:30", "UTC+8", "+8", "0", "Z".
std::optional<UtcOffset> parse_utc_offset(std::string_view text);

std::string format_rfc3339(TimePoint instant, UtcOffset offset = UtcOffset{0});
std::string format_utc_offset(UtcOffset offset);

// Local-time views. All are pure functions of (instant, offset).
std::chrono::sys_seconds to_local(TimePoint instant, UtcOffset offset);
std::chrono::sys_days local_day(TimePoint instant, UtcOffset offset);
int local_hour(TimePoint instant, UtcOffset offset);
// Seconds since local midnight.
int local_second_of_day(TimePoint instant, UtcOffset offset);
// "06:00 PM"
std::string clock_12h(TimePoint instant, UtcOffset offset);
// "Monday".."Sunday"
std::string_view weekday_name(TimePoint instant, UtcOffset offset);
bool is_weekend(TimePoint instant, UtcOffset offset);

// Instant at which the local calendar day containing `instant` ends.
TimePoint local_day_end(TimePoint instant, UtcOffset offset);

}  // namespace mobcast
