#include <gtest/gtest.h>

#include <fmt/format.h>

#include "mobcast/memory.hpp"
#include "test_support.hpp"

namespace mobcast {
namespace {

using testing::stay_at;

PoiCatalog catalog() {
  PoiCatalog c;
  c["A"] = Poi{"A", "Cafe", std::nullopt, ""};
  c["B"] = Poi{"B", "Gym", std::nullopt, ""};
  return c;
}

// Tuesday 2012-04-03 and Wednesday 2012-04-04, UTC.
std::vector<Stay> history() {
  return {stay_at("A", "2012-04-03T09:00:00Z", 60), stay_at("B", "2012-04-03T10:00:00Z", 60),
          stay_at("A", "2012-04-04T09:00:00Z", 60)};
}

std::vector<Stay> context() {
  return {stay_at("X", "2012-04-10T20:00:00Z", 60), stay_at("Y", "2012-04-10T21:00:00Z", 30)};
}

TEST(LongTerm, CountsAndRanking) {
  const auto m = write_long_term(history(), catalog());
  EXPECT_EQ(m.visit_frequency.at("A"), 2u);
  EXPECT_EQ(m.visit_frequency.at("B"), 1u);
  EXPECT_EQ(m.frequent_hours, (std::vector<HourCount>{{9, 2}, {10, 1}}));
  EXPECT_EQ(m.frequent_venues, (std::vector<PlaceCount>{{"A", 2}, {"B", 1}}));
  EXPECT_EQ(m.transition_counts.at({"A", "B"}), 1u);
  EXPECT_EQ(m.transition_counts.at({"B", "A"}), 1u);
  EXPECT_EQ(m.venue_categories.at("A"), "Cafe");
  EXPECT_EQ(m.weekday_visits, 3u);
}

TEST(LongTerm, SelfTransitionsCountTowardNMinusOne) {
  const std::vector<Stay> h{stay_at("A", "2012-04-03T09:00:00Z"),
                            stay_at("A", "2012-04-03T10:00:00Z"),
                            stay_at("B", "2012-04-03T11:00:00Z")};
  const auto m = write_long_term(h, {});
  std::size_t total = 0;
  for (const auto& [_, c] : m.transition_counts) total += c;
  EXPECT_EQ(total, 2u);
  EXPECT_EQ(m.venue_categories.at("A"), "unknown");
}

TEST(LongTerm, PerSessionTransitions) {
  MemoryOptions o;
  o.per_session_transitions = true;
  const std::vector<std::size_t> segments{2, 1};
  const auto m = write_long_term(history(), catalog(), o, segments);
  EXPECT_EQ(m.transition_counts.size(), 1u);
  EXPECT_EQ(m.transition_counts.count({"B", "A"}), 0u);
}

TEST(LongTerm, TopKAndTieBreaks) {
  std::vector<Stay> h;
  for (const char* p : {"D", "C", "B", "A", "E", "F"}) {
    h.push_back(stay_at(p, "2012-04-03T09:00:00Z"));
  }
  MemoryOptions o;
  o.top_k = 3;
  const auto m = write_long_term(h, {}, o);
  EXPECT_EQ(m.frequent_venues, (std::vector<PlaceCount>{{"A", 1}, {"B", 1}, {"C", 1}}));
}

TEST(Profile, ArgmaxTieBreaks) {
  PoiCatalog c;
  c["A"] = Poi{"A", "Zoo", std::nullopt, ""};
  c["B"] = Poi{"B", "Bar", std::nullopt, ""};
  const std::vector<Stay> h{stay_at("A", "2012-04-03T11:00:00Z"),
                            stay_at("B", "2012-04-03T09:00:00Z")};
  const auto p = derive_profile(write_long_term(h, c));
  EXPECT_EQ(p.most_frequent_hour, 9);  // tie: smaller hour
  EXPECT_EQ(p.most_frequent_category, "Bar");  // tie: smaller category
  EXPECT_EQ(p.most_frequent_category_count, 1u);
}

TEST(Profile, Insights) {
  const auto p = derive_profile(write_long_term(history(), catalog()));
  EXPECT_EQ(p.insights, (std::vector<std::string>{"is mainly active on weekdays",
                                                  "mostly returns to place A"}));
  const std::vector<Stay> late{stay_at("A", "2012-04-07T22:00:00Z"),
                               stay_at("B", "2012-04-08T23:00:00Z")};
  const auto q = derive_profile(write_long_term(late, {}));
  EXPECT_EQ(q.insights, (std::vector<std::string>{"is mainly active on weekends",
                                                  "is often active late at night"}));
}

TEST(ShortTerm, LastVisit) {
  const auto s = write_short_term(context(), catalog());
  ASSERT_TRUE(s.last_visit);
  EXPECT_EQ(s.last_visit->place, "Y");
  EXPECT_EQ(s.last_visit->start_time, "09:00 PM");
  EXPECT_EQ(s.last_visit->day_of_week, "Tuesday");
  EXPECT_EQ(s.recent_visit_frequency.at("X"), 1u);
}

TEST(Render, MatchesTemplate) {
  PoiCatalog c = catalog();
  c["Y"] = Poi{"Y", "Gym", std::nullopt, ""};
  const auto lt = write_long_term(history(), c);
  const std::string text =
      render_memory_prompt(lt, write_short_term(context(), c), derive_profile(lt));
  const std::string expected =
      "### long term memory info\n"
      "Place id to name mapping: A: Cafe, B: Gym.\n"
      "In historical stays, The user frequently engages in activities at 09:00 (2 "
      "times), 10:00 (1 times).\n"
      "The most frequently visited venues are A (2 times), B (1 times).\n"
      "Hourly venue activities include 09:00: A (2 times); 10:00: B (1 times).\n"
      "The user's activity transitions often include sequences such as A→B (1 "
      "times), B→A (1 times).\n"
      "\n"
      "### short term memory info\n"
      "In recent context stays, user's last visit was on Tuesday 09:00 PM at Y (Gym)\n"
      "Frequently visited locations include: X (1 times), Y (1 times)\n"
      "Visit times: Tuesday 08:00 PM at X, Tuesday 09:00 PM at Y\n"
      "\n"
      "### user profile\n"
      "The user is most active at 09:00 with 2 visits.\n"
      "They frequently visit Cafe with 2 visits\n"
      "Based on the data, the user is mainly active on weekdays, mostly returns to "
      "place A.\n";
  EXPECT_EQ(text, expected);
}

TEST(Render, EmptyMemory) {
  const std::string text = render_memory_prompt({}, {}, {});
  EXPECT_EQ(text,
            "### long term memory info\nNo history available.\n\n"
            "### short term memory info\nNo history available.\n\n"
            "### user profile\nNo history available.\n");
}

TEST(Render, BudgetDropsLowestCountsFirst) {
  std::vector<Stay> h;
  for (int i = 0; i < 40; ++i) {
    h.push_back(stay_at(i % 4 == 0 ? "HOME" : fmt::format("P{:02}", i), 
                        fmt::format("2012-04-{:02}T{:02}:00:00Z", 3 + i / 10, 8 + i % 10)));
  }
  const auto lt = write_long_term(h, {});
  const auto full = render_memory_prompt(lt, {}, derive_profile(lt), 100000);
  const auto cut = render_memory_prompt(lt, {}, derive_profile(lt), 900);
  EXPECT_LT(cut.size(), full.size());
  EXPECT_LE(cut.size(), 900u);
  EXPECT_NE(cut.find("The most frequently visited venues are HOME (10 times)"),
            std::string::npos);
}

TEST(Pool, PutGetDump) {
  MemoryPool pool;
  TestInstance in;
  in.user_id = "u";
  in.historical = history();
  in.context = context();
  pool.put("u", build_memory(in, catalog()));
  EXPECT_TRUE(pool.contains("u"));
  EXPECT_EQ(pool.size(), 1u);
  const auto dump = pool.dump("u");
  EXPECT_EQ(dump["user"], "u");
  EXPECT_EQ(dump["memory"]["long_term"]["visit_frequency"]["A"], 2);
  EXPECT_TRUE(pool.dump("nobody").is_null());
}

}  // namespace
}  // namespace mobcast
