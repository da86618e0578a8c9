#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mobcast/trajectory.hpp"

namespace mobcast {

struct HourCount {
  int hour = 0;
  std::size_t count = 0;
  bool operator==(const HourCount&) const = default;
};

struct PlaceCount {
  std::string place;
  std::size_t count = 0;
  bool operator==(const PlaceCount&) const = default;
};

using Transition = std::pair<std::string, std::string>;

// Long-term statistics over a user's historical stays.
//
// Ranked lists are sorted by count descending; ties go to the smaller hour or
// the lexicographically smaller place id.
struct LongTermMemory {
  std::map<std::string, std::string> venue_categories;
  std::vector<HourCount> frequent_hours;
  std::vector<PlaceCount> frequent_venues;
  std::map<int, std::vector<PlaceCount>> hourly_activity;
  std::map<Transition, std::size_t> transition_counts;
  std::map<std::string, std::size_t> visit_frequency;
  std::size_t weekday_visits = 0;
  std::size_t weekend_visits = 0;

  bool empty() const { return visit_frequency.empty(); }
  bool operator==(const LongTermMemory&) const = default;
};

struct LastVisit {
  std::string place;
  std::string start_time;
  std::string day_of_week;
  std::string category;
  bool operator==(const LastVisit&) const = default;
};

struct ShortTermMemory {
  std::vector<Stay> recent_visits;  // context order
  std::map<std::string, std::size_t> recent_visit_frequency;
  std::optional<LastVisit> last_visit;

  bool empty() const { return recent_visits.empty(); }
  bool operator==(const ShortTermMemory&) const = default;
};

struct UserProfile {
  std::optional<int> most_frequent_hour;
  std::size_t most_frequent_hour_count = 0;
  std::string most_frequent_category;
  std::size_t most_frequent_category_count = 0;
  std::vector<std::string> insights;

  bool empty() const { return !most_frequent_hour.has_value(); }
  bool operator==(const UserProfile&) const = default;
};

struct MemoryOptions {
  std::size_t top_k = 5;
  // Count transitions only inside each historical session.
  bool per_session_transitions = false;
  std::size_t prompt_budget_chars = 3000;
};

struct MemoryEntry {
  LongTermMemory long_term;
  ShortTermMemory short_term;
  UserProfile profile;
};

// `segments` gives the session run lengths of `historical`; it is only
// consulted when options.per_session_transitions is set.
LongTermMemory write_long_term(std::span<const Stay> historical,
                               const PoiCatalog& catalog,
                               const MemoryOptions& options = {},
                               std::span<const std::size_t> segments = {});

ShortTermMemory write_short_term(std::span<const Stay> context,
                                 const PoiCatalog& catalog = {});

UserProfile derive_profile(const LongTermMemory& memory);

// Three sections (long term, short term, profile). When the text would exceed
// `budget_chars`, list entries with the lowest counts are dropped first.
std::string render_memory_prompt(const LongTermMemory& long_term,
                                 const ShortTermMemory& short_term,
                                 const UserProfile& profile,
                                 std::size_t budget_chars = 3000);

MemoryEntry build_memory(const TestInstance& instance, const PoiCatalog& catalog,
                         const MemoryOptions& options = {});

nlohmann::ordered_json to_json(const MemoryEntry& entry);

// Memories keyed by user id. Reads may run concurrently; writes take an
// exclusive lock.
class MemoryPool {
 public:
  void put(const std::string& user_id, MemoryEntry entry);
  std::optional<MemoryEntry> get(const std::string& user_id) const;
  bool contains(const std::string& user_id) const;
  std::size_t size() const;
  nlohmann::ordered_json dump(const std::string& user_id) const;
  nlohmann::ordered_json dump_all() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, MemoryEntry> entries_;
};

}  // namespace mobcast
