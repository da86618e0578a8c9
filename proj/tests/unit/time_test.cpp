#include <gtest/gtest.h>

#include "mobcast/time.hpp"
#include "test_support.hpp"

namespace mobcast {
namespace {

using testing::at;
using namespace std::chrono;

TEST(Time, ParsesRfc3339WithOffsetAndFraction) {
  const auto p = parse_rfc3339("2012-04-03T18:00:00.250+09:00");
  ASSERT_TRUE(p);
  EXPECT_EQ(p->offset, minutes{540});
  EXPECT_EQ(format_rfc3339(p->instant), "2012-04-03T09:00:00Z");
}

TEST(Time, RejectsGarbage) {
  EXPECT_FALSE(parse_rfc3339("2012-13-03T18:00:00Z"));
  EXPECT_FALSE(parse_rfc3339("yesterday"));
  EXPECT_FALSE(parse_timestamp(""));
}

TEST(Time, ParsesFoursquareFormat) {
  const auto p = parse_foursquare_time("Tue Apr 03 18:00:09 +0000 2012");
  ASSERT_TRUE(p);
  EXPECT_EQ(format_rfc3339(p->instant), "2012-04-03T18:00:09Z");
}

TEST(Time, OffsetSpellings) {
  EXPECT_EQ(parse_utc_offset("+08:00"), minutes{480});
  EXPECT_EQ(parse_utc_offset("UTC+8"), minutes{480});
  EXPECT_EQ(parse_utc_offset("-05:30"), minutes{-330});
  EXPECT_EQ(parse_utc_offset("Z"), minutes{0});
  EXPECT_FALSE(parse_utc_offset("+25:00"));
  EXPECT_EQ(format_utc_offset(minutes{-330}), "-05:30");
}

TEST(Time, LocalViews) {
  const TimePoint t = at("2012-04-03T13:05:00Z");  // Tuesday
  EXPECT_EQ(clock_12h(t, minutes{0}), "01:05 PM");
  EXPECT_EQ(clock_12h(t, minutes{-13 * 60 - 5}), "12:00 AM");
  EXPECT_EQ(weekday_name(t, minutes{0}), "Tuesday");
  EXPECT_EQ(weekday_name(t, minutes{12 * 60}), "Wednesday");
  EXPECT_EQ(local_hour(t, minutes{540}), 22);
  EXPECT_FALSE(is_weekend(t, minutes{0}));
  EXPECT_TRUE(is_weekend(at("2012-04-07T10:00:00Z"), minutes{0}));
  EXPECT_EQ(format_rfc3339(local_day_end(t, minutes{540})), "2012-04-03T15:00:00Z");
}

TEST(Time, FormatsWithOffset) {
  EXPECT_EQ(format_rfc3339(at("2012-04-03T13:05:00Z"), minutes{540}),
            "2012-04-03T22:05:00+09:00");
}

}  // namespace
}  // namespace mobcast
