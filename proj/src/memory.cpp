#include "mobcast/memory.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>

#include <fmt/format.h>

namespace mobcast {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kNoHistory = "No history available.";
constexpr std::string_view kUnknownCategory = "unknown";

std::string category_of(const PoiCatalog& catalog, const std::string& place) {
  const auto it = catalog.find(place);
  if (it == catalog.end() || it->second.category.empty()) {
    return std::string{kUnknownCategory};
  }
  return it->second.category;
}

bool by_count_then_place(const PlaceCount& a, const PlaceCount& b) {
  return a.count != b.count ? a.count > b.count : a.place < b.place;
}

std::string hour_label(int hour) { return fmt::format("{:02}:00", hour); }

std::string times(std::size_t count) { return fmt::format("({} times)", count); }

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string or_none(std::string text) {
  return text.empty() ? std::string{"(none)"} : text;
}

// Mutable copy of the rendered lists; truncation removes entries from it.
struct LongTermView {
  std::vector<PlaceCount> mapping;  // place + visit count, id order
  std::vector<std::string> mapping_names;
  std::vector<HourCount> hours;
  std::vector<PlaceCount> venues;
  std::vector<std::pair<int, std::vector<PlaceCount>>> hourly;
  std::vector<std::pair<Transition, std::size_t>> transitions;
};

LongTermView make_view(const LongTermMemory& memory) {
  LongTermView view;
  for (const auto& [place, name] : memory.venue_categories) {
    const auto freq = memory.visit_frequency.find(place);
    view.mapping.push_back(
        {place, freq == memory.visit_frequency.end() ? 0 : freq->second});
    view.mapping_names.push_back(name);
  }
  view.hours = memory.frequent_hours;
  view.venues = memory.frequent_venues;
  for (const auto& [hour, places] : memory.hourly_activity) {
    view.hourly.emplace_back(hour, places);
  }
  view.transitions.assign(memory.transition_counts.begin(),
                          memory.transition_counts.end());
  std::stable_sort(view.transitions.begin(), view.transitions.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return view;
}

std::string render_long_term(const LongTermView& view) {
  std::vector<std::string> mapping;
  for (std::size_t i = 0; i < view.mapping.size(); ++i) {
    mapping.push_back(fmt::format("{}: {}", view.mapping[i].place,
                                  view.mapping_names[i]));
  }
  std::vector<std::string> hours;
  for (const auto& h : view.hours) {
    hours.push_back(fmt::format("{} {}", hour_label(h.hour), times(h.count)));
  }
  std::vector<std::string> venues;
  for (const auto& v : view.venues) {
    venues.push_back(fmt::format("{} {}", v.place, times(v.count)));
  }
  std::vector<std::string> hourly;
  for (const auto& [hour, places] : view.hourly) {
    if (places.empty()) continue;
    std::vector<std::string> entries;
    for (const auto& p : places) {
      entries.push_back(fmt::format("{} {}", p.place, times(p.count)));
    }
    hourly.push_back(fmt::format("{}: {}", hour_label(hour), join(entries, ", ")));
  }
  std::vector<std::string> transitions;
  for (const auto& [pair, count] : view.transitions) {
    transitions.push_back(
        fmt::format("{}→{} {}", pair.first, pair.second, times(count)));
  }
  std::string out = "### long term memory info\n";
  out += fmt::format("Place id to name mapping: {}.\n", or_none(join(mapping, ", ")));
  out += fmt::format(
      "In historical stays, The user frequently engages in activities at {}.\n",
      or_none(join(hours, ", ")));
  out += fmt::format("The most frequently visited venues are {}.\n",
                     or_none(join(venues, ", ")));
  out += fmt::format("Hourly venue activities include {}.\n",
                     or_none(join(hourly, "; ")));
  out += fmt::format(
      "The user's activity transitions often include sequences such as {}.\n",
      or_none(join(transitions, ", ")));
  return out;
}

std::string render_short_term(const ShortTermMemory& memory) {
  std::string out = "### short term memory info\n";
  if (memory.empty() || !memory.last_visit) {
    out += kNoHistory;
    out += '\n';
    return out;
  }
  const LastVisit& last = *memory.last_visit;
  std::vector<PlaceCount> freq;
  for (const auto& [place, count] : memory.recent_visit_frequency) {
    freq.push_back({place, count});
  }
  std::sort(freq.begin(), freq.end(), by_count_then_place);
  std::vector<std::string> freq_text;
  for (const auto& f : freq) {
    freq_text.push_back(fmt::format("{} {}", f.place, times(f.count)));
  }
  std::vector<std::string> visits;
  for (const Stay& stay : memory.recent_visits) {
    visits.push_back(fmt::format("{} {} at {}", stay.day_of_week(),
                                 stay.start_time(), stay.poi_id));
  }
  out += fmt::format(
      "In recent context stays, user's last visit was on {} {} at {} ({})\n",
      last.day_of_week, last.start_time, last.place, last.category);
  out += fmt::format("Frequently visited locations include: {}\n",
                     join(freq_text, ", "));
  out += fmt::format("Visit times: {}\n", join(visits, ", "));
  return out;
}

std::string render_profile(const UserProfile& profile) {
  std::string out = "### user profile\n";
  if (profile.empty()) {
    out += kNoHistory;
    out += '\n';
    return out;
  }
  out += fmt::format("The user is most active at {} with {} visits.\n",
                     hour_label(*profile.most_frequent_hour),
                     profile.most_frequent_hour_count);
  out += fmt::format("They frequently visit {} with {} visits\n",
                     profile.most_frequent_category,
                     profile.most_frequent_category_count);
  out += fmt::format("Based on the data, the user {}.\n",
                     profile.insights.empty() ? std::string{"has no distinctive routine"}
                                              : join(profile.insights, ", "));
  return out;
}

// Removes the single lowest-count entry across the droppable lists. Returns
// false when nothing is left to drop.
bool drop_lowest(LongTermView& view) {
  // (count, list priority); lower sorts first and is dropped first.
  struct Candidate {
    std::size_t count;
    int priority;
    int list;
    std::size_t index;
    std::size_t inner;
  };
  std::optional<Candidate> best;
  const auto consider = [&best](Candidate c) {
    if (!best || c.count < best->count ||
        (c.count == best->count && c.priority < best->priority) ||
        (c.count == best->count && c.priority == best->priority &&
         c.index >= best->index)) {
      best = c;
    }
  };
  for (std::size_t i = 0; i < view.transitions.size(); ++i) {
    consider({view.transitions[i].second, 0, 0, i, 0});
  }
  for (std::size_t i = 0; i < view.hourly.size(); ++i) {
    const auto& places = view.hourly[i].second;
    for (std::size_t j = 0; j < places.size(); ++j) {
      consider({places[j].count, 1, 1, i, j});
    }
  }
  for (std::size_t i = 0; i < view.mapping.size(); ++i) {
    consider({view.mapping[i].count, 2, 2, i, 0});
  }
  for (std::size_t i = 0; i < view.venues.size(); ++i) {
    consider({view.venues[i].count, 3, 3, i, 0});
  }
  for (std::size_t i = 0; i < view.hours.size(); ++i) {
    consider({view.hours[i].count, 4, 4, i, 0});
  }
  if (!best) return false;
  const auto at = [](auto& vec, std::size_t i) {
    return vec.begin() + static_cast<std::ptrdiff_t>(i);
  };
  switch (best->list) {
    case 0:
      view.transitions.erase(at(view.transitions, best->index));
      break;
    case 1: {
      auto& places = view.hourly[best->index].second;
      places.erase(at(places, best->inner));
      if (places.empty()) view.hourly.erase(at(view.hourly, best->index));
      break;
    }
    case 2:
      view.mapping.erase(at(view.mapping, best->index));
      view.mapping_names.erase(at(view.mapping_names, best->index));
      break;
    case 3:
      view.venues.erase(at(view.venues, best->index));
      break;
    case 4:
      view.hours.erase(at(view.hours, best->index));
      break;
  }
  return true;
}

ordered_json place_counts_json(const std::vector<PlaceCount>& list) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : list) arr.push_back({p.place, p.count});
  return arr;
}

}  // namespace

LongTermMemory write_long_term(std::span<const Stay> historical,
                               const PoiCatalog& catalog,
                               const MemoryOptions& options,
                               std::span<const std::size_t> segments) {
  LongTermMemory memory;
  if (historical.empty()) return memory;

  std::map<int, std::size_t> hour_counts;
  std::map<int, std::map<std::string, std::size_t>> hourly;
  for (const Stay& stay : historical) {
    ++memory.visit_frequency[stay.poi_id];
    memory.venue_categories.try_emplace(stay.poi_id,
                                        category_of(catalog, stay.poi_id));
    const int hour = stay.hour();
    ++hour_counts[hour];
    ++hourly[hour][stay.poi_id];
    ++(stay.weekend() ? memory.weekend_visits : memory.weekday_visits);
  }

  // Pairs never cross a segment boundary when per-session counting is on.
  std::vector<std::size_t> runs;
  const std::size_t segment_total =
      std::accumulate(segments.begin(), segments.end(), std::size_t{0});
  if (options.per_session_transitions && segment_total == historical.size()) {
    runs.assign(segments.begin(), segments.end());
  } else {
    runs.push_back(historical.size());
  }
  std::size_t offset = 0;
  for (const std::size_t run : runs) {
    for (std::size_t i = offset + 1; i < offset + run; ++i) {
      ++memory.transition_counts[{historical[i - 1].poi_id, historical[i].poi_id}];
    }
    offset += run;
  }

  for (const auto& [hour, count] : hour_counts) {
    memory.frequent_hours.push_back({hour, count});
  }
  std::stable_sort(memory.frequent_hours.begin(), memory.frequent_hours.end(),
                   [](const HourCount& a, const HourCount& b) {
                     return a.count > b.count;
                   });
  if (memory.frequent_hours.size() > options.top_k) {
    memory.frequent_hours.resize(options.top_k);
  }

  for (const auto& [place, count] : memory.visit_frequency) {
    memory.frequent_venues.push_back({place, count});
  }
  std::sort(memory.frequent_venues.begin(), memory.frequent_venues.end(),
            by_count_then_place);
  if (memory.frequent_venues.size() > options.top_k) {
    memory.frequent_venues.resize(options.top_k);
  }

  for (const auto& [hour, places] : hourly) {
    auto& list = memory.hourly_activity[hour];
    for (const auto& [place, count] : places) list.push_back({place, count});
    std::sort(list.begin(), list.end(), by_count_then_place);
  }
  return memory;
}

ShortTermMemory write_short_term(std::span<const Stay> context,
                                 const PoiCatalog& catalog) {
  ShortTermMemory memory;
  if (context.empty()) return memory;
  memory.recent_visits.assign(context.begin(), context.end());
  for (const Stay& stay : context) ++memory.recent_visit_frequency[stay.poi_id];
  const Stay& last = context.back();
  memory.last_visit = LastVisit{last.poi_id, last.start_time(),
                                std::string{last.day_of_week()},
                                category_of(catalog, last.poi_id)};
  return memory;
}

UserProfile derive_profile(const LongTermMemory& memory) {
  UserProfile profile;
  if (memory.empty() || memory.frequent_hours.empty()) return profile;

  profile.most_frequent_hour = memory.frequent_hours.front().hour;
  profile.most_frequent_hour_count = memory.frequent_hours.front().count;

  std::map<std::string, std::size_t> categories;
  for (const auto& [place, count] : memory.visit_frequency) {
    const auto it = memory.venue_categories.find(place);
    categories[it == memory.venue_categories.end() ? std::string{kUnknownCategory}
                                                   : it->second] += count;
  }
  for (const auto& [category, count] : categories) {
    if (count > profile.most_frequent_category_count) {
      profile.most_frequent_category = category;
      profile.most_frequent_category_count = count;
    }
  }

  // Weekday/weekend skew compares per-day rates (5 weekdays, 2 weekend days).
  const double weekday_rate = static_cast<double>(memory.weekday_visits) / 5.0;
  const double weekend_rate = static_cast<double>(memory.weekend_visits) / 2.0;
  if (weekday_rate > 2.0 * weekend_rate) {
    profile.insights.emplace_back("is mainly active on weekdays");
  } else if (weekend_rate > 2.0 * weekday_rate) {
    profile.insights.emplace_back("is mainly active on weekends");
  }

  std::size_t total = 0;
  for (const auto& [place, count] : memory.visit_frequency) total += count;
  const PlaceCount& top = memory.frequent_venues.front();
  if (total >= 3 && 2 * top.count > total) {
    profile.insights.push_back(fmt::format("mostly returns to place {}", top.place));
  }
  if (*profile.most_frequent_hour > 21) {
    profile.insights.emplace_back("is often active late at night");
  }
  return profile;
}

std::string render_memory_prompt(const LongTermMemory& long_term,
                                 const ShortTermMemory& short_term,
                                 const UserProfile& profile,
                                 std::size_t budget_chars) {
  const std::string short_text = render_short_term(short_term);
  const std::string profile_text = render_profile(profile);
  const auto assemble = [&](const std::string& long_text) {
    return long_text + "\n" + short_text + "\n" + profile_text;
  };
  if (long_term.empty()) {
    return assemble(fmt::format("### long term memory info\n{}\n", kNoHistory));
  }
  LongTermView view = make_view(long_term);
  std::string text = assemble(render_long_term(view));
  while (text.size() > budget_chars && drop_lowest(view)) {
    text = assemble(render_long_term(view));
  }
  return text;
}

MemoryEntry build_memory(const TestInstance& instance, const PoiCatalog& catalog,
                         const MemoryOptions& options) {
  MemoryEntry entry;
  entry.long_term = write_long_term(instance.historical, catalog, options,
                                    instance.historical_segments);
  entry.short_term = write_short_term(instance.context, catalog);
  entry.profile = derive_profile(entry.long_term);
  return entry;
}

ordered_json to_json(const MemoryEntry& entry) {
  const LongTermMemory& lt = entry.long_term;
  ordered_json long_term;
  long_term["venue_id_to_name"] = lt.venue_categories;
  ordered_json hours = ordered_json::array();
  for (const auto& h : lt.frequent_hours) hours.push_back({h.hour, h.count});
  long_term["frequent_hours"] = hours;
  long_term["frequent_venues"] = place_counts_json(lt.frequent_venues);
  ordered_json hourly = ordered_json::object();
  for (const auto& [hour, places] : lt.hourly_activity) {
    hourly[std::to_string(hour)] = place_counts_json(places);
  }
  long_term["hourly_activity"] = hourly;
  ordered_json transitions = ordered_json::array();
  for (const auto& [pair, count] : lt.transition_counts) {
    transitions.push_back({{"from", pair.first}, {"to", pair.second}, {"count", count}});
  }
  long_term["transition_counts"] = transitions;
  long_term["visit_frequency"] = lt.visit_frequency;
  long_term["weekday_visits"] = lt.weekday_visits;
  long_term["weekend_visits"] = lt.weekend_visits;

  const ShortTermMemory& st = entry.short_term;
  ordered_json short_term;
  ordered_json visits = ordered_json::array();
  for (const Stay& stay : st.recent_visits) {
    visits.push_back({{"time", format_rfc3339(stay.time, stay.utc_offset)},
                      {"location", stay.poi_id}});
  }
  short_term["recent_visit_times"] = visits;
  short_term["recent_visit_frequency"] = st.recent_visit_frequency;
  if (st.last_visit) {
    short_term["last_visit"] = {{"location", st.last_visit->place},
                                {"start_time", st.last_visit->start_time},
                                {"day_of_week", st.last_visit->day_of_week},
                                {"category", st.last_visit->category}};
  } else {
    short_term["last_visit"] = nullptr;
  }

  const UserProfile& p = entry.profile;
  ordered_json profile;
  if (p.most_frequent_hour) {
    profile["most_frequent_hour"] = *p.most_frequent_hour;
  } else {
    profile["most_frequent_hour"] = nullptr;
  }
  profile["most_frequent_hour_count"] = p.most_frequent_hour_count;
  profile["most_frequent_venue_category"] = p.most_frequent_category;
  profile["most_frequent_venue_count"] = p.most_frequent_category_count;
  profile["insights"] = p.insights;

  ordered_json out;
  out["long_term"] = std::move(long_term);
  out["short_term"] = std::move(short_term);
  out["profile"] = std::move(profile);
  return out;
}

void MemoryPool::put(const std::string& user_id, MemoryEntry entry) {
  std::unique_lock lock(mutex_);
  entries_.insert_or_assign(user_id, std::move(entry));
}

std::optional<MemoryEntry> MemoryPool::get(const std::string& user_id) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(user_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool MemoryPool::contains(const std::string& user_id) const {
  std::shared_lock lock(mutex_);
  return entries_.count(user_id) > 0;
}

std::size_t MemoryPool::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

ordered_json MemoryPool::dump(const std::string& user_id) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(user_id);
  if (it == entries_.end()) return nullptr;
  ordered_json out;
  out["user"] = user_id;
  out["memory"] = to_json(it->second);
  return out;
}

ordered_json MemoryPool::dump_all() const {
  std::shared_lock lock(mutex_);
  ordered_json out = ordered_json::object();
  for (const auto& [user, entry] : entries_) out[user] = to_json(entry);
  return out;
}

}  // namespace mobcast
