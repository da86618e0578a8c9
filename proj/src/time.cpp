#include "mobcast/time.hpp"

#include <array>
#include <cctype>
#include <charconv>

#include <fmt/format.h>

namespace mobcast {
namespace {

using namespace std::chrono;

constexpr std::array<std::string_view, 7> kWeekdayNames = {
    "Sunday", "Monday", "Tuesday", "Wednesday", "Thursday", "Friday",
    "Saturday"};

constexpr std::array<std::string_view, 12> kMonthAbbrev = {
    "Jan", "Feb", "Mar", "Apr", "May", "Jun",
    "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

bool read_int(std::string_view text, std::size_t pos, std::size_t len,
              int& out) {
  if (pos + len > text.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
  }
  auto [ptr, ec] =
      std::from_chars(text.data() + pos, text.data() + pos + len, out);
  return ec == std::errc{} && ptr == text.data() + pos + len;
}

std::optional<TimePoint> make_instant(int y, int mo, int d, int h, int mi,
                                      int s) {
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) {
    return std::nullopt;
  }
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

// "+HH:MM", "+HHMM", "Z"
std::optional<UtcOffset> parse_numeric_offset(std::string_view text) {
  if (text == "Z" || text == "z") return UtcOffset{0};
  if (text.size() < 3 || (text[0] != '+' && text[0] != '-')) {
    return std::nullopt;
  }
  const int sign = text[0] == '-' ? -1 : 1;
  int hh = 0;
  int mm = 0;
  if (!read_int(text, 1, 2, hh)) return std::nullopt;
  if (text.size() == 6 && text[3] == ':') {
    if (!read_int(text, 4, 2, mm)) return std::nullopt;
  } else if (text.size() == 5) {
    if (!read_int(text, 3, 2, mm)) return std::nullopt;
  } else if (text.size() != 3) {
    return std::nullopt;
  }
  if (hh > 14 || mm > 59) return std::nullopt;
  return UtcOffset{sign * (hh * 60 + mm)};
}

}  // namespace

std::optional<ParsedTime> parse_rfc3339(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM)
  int y, mo, d, h, mi, s;
  if (text.size() < 20) return std::nullopt;
  if (!read_int(text, 0, 4, y) || text[4] != '-' || !read_int(text, 5, 2, mo) ||
      text[7] != '-' || !read_int(text, 8, 2, d) ||
      (text[10] != 'T' && text[10] != 't' && text[10] != ' ') ||
      !read_int(text, 11, 2, h) || text[13] != ':' ||
      !read_int(text, 14, 2, mi) || text[16] != ':' ||
      !read_int(text, 17, 2, s)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    const std::size_t digits_start = pos;
    while (pos < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[pos]))) {
      ++pos;
    }
    if (pos == digits_start) return std::nullopt;
  }
  const auto offset = parse_numeric_offset(text.substr(pos));
  if (!offset) return std::nullopt;
  const auto local = make_instant(y, mo, d, h, mi, s);
  if (!local) return std::nullopt;
  return ParsedTime{*local - *offset, *offset};
}

std::optional<ParsedTime> parse_foursquare_time(std::string_view text) {
  // Www Mmm DD HH:MM:SS +ZZZZ YYYY
  if (text.size() != 30) return std::nullopt;
  const std::string_view mon = text.substr(4, 3);
  int mo = 0;
  for (std::size_t i = 0; i < kMonthAbbrev.size(); ++i) {
    if (kMonthAbbrev[i] == mon) mo = static_cast<int>(i) + 1;
  }
  int d, h, mi, s, y;
  if (mo == 0 || text[3] != ' ' || text[7] != ' ' || !read_int(text, 8, 2, d) ||
      text[10] != ' ' || !read_int(text, 11, 2, h) || text[13] != ':' ||
      !read_int(text, 14, 2, mi) || text[16] != ':' ||
      !read_int(text, 17, 2, s) || text[19] != ' ' || text[25] != ' ' ||
      !read_int(text, 26, 4, y)) {
    return std::nullopt;
  }
  const auto offset = parse_numeric_offset(text.substr(20, 5));
  if (!offset) return std::nullopt;
  const auto local = make_instant(y, mo, d, h, mi, s);
  if (!local) return std::nullopt;
  return ParsedTime{*local - *offset, *offset};
}

std::optional<ParsedTime> parse_timestamp(std::string_view text) {
  if (auto t = parse_rfc3339(text)) return t;
  return parse_foursquare_time(text);
}

std::optional<UtcOffset> parse_utc_offset(std::string_view text) {
  if (text.starts_with("UTC") || text.starts_with("utc")) {
    text.remove_prefix(3);
    if (text.empty()) return UtcOffset{0};
  }
  if (auto numeric = parse_numeric_offset(text)) return numeric;
  // Bare hours: "8", "+8", "-5".
  int sign = 1;
  if (!text.empty() && (text[0] == '+' || text[0] == '-')) {
    sign = text[0] == '-' ? -1 : 1;
    text.remove_prefix(1);
  }
  int hh = 0;
  if (text.empty() || text.size() > 2 || !read_int(text, 0, text.size(), hh) ||
      hh > 14) {
    return std::nullopt;
  }
  return UtcOffset{sign * hh * 60};
}

std::string format_utc_offset(UtcOffset offset) {
  if (offset.count() == 0) return "Z";
  const int total = static_cast<int>(offset.count());
  const int magnitude = total < 0 ? -total : total;
  return fmt::format("{}{:02}:{:02}", total < 0 ? '-' : '+', magnitude / 60,
                     magnitude % 60);
}

std::string format_rfc3339(TimePoint instant, UtcOffset offset) {
  const auto local = to_local(instant, offset);
  const auto day = floor<days>(local);
  const year_month_day ymd{day};
  const hh_mm_ss hms{local - day};
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}{}",
                     static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()), hms.hours().count(),
                     hms.minutes().count(), hms.seconds().count(),
                     format_utc_offset(offset));
}

sys_seconds to_local(TimePoint instant, UtcOffset offset) {
  return instant + offset;
}

sys_days local_day(TimePoint instant, UtcOffset offset) {
  return floor<days>(to_local(instant, offset));
}

int local_second_of_day(TimePoint instant, UtcOffset offset) {
  const auto local = to_local(instant, offset);
  return static_cast<int>((local - floor<days>(local)).count());
}

int local_hour(TimePoint instant, UtcOffset offset) {
  return local_second_of_day(instant, offset) / 3600;
}

std::string clock_12h(TimePoint instant, UtcOffset offset) {
  const int sod = local_second_of_day(instant, offset);
  const int hour = sod / 3600;
  const int minute = (sod / 60) % 60;
  const int hour12 = hour % 12 == 0 ? 12 : hour % 12;
  return fmt::format("{:02}:{:02} {}", hour12, minute, hour < 12 ? "AM" : "PM");
}

std::string_view weekday_name(TimePoint instant, UtcOffset offset) {
  return kWeekdayNames[weekday{local_day(instant, offset)}.c_encoding()];
}

bool is_weekend(TimePoint instant, UtcOffset offset) {
  const unsigned wd = weekday{local_day(instant, offset)}.c_encoding();
  return wd == 0 || wd == 6;
}

TimePoint local_day_end(TimePoint instant, UtcOffset offset) {
  return sys_seconds{local_day(instant, offset) + days{1}} - offset;
}

}  // namespace mobcast
