#include "mobcast/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "mobcast/random.hpp"

namespace mobcast {
namespace {

using json = nlohmann::json;
using std::chrono::duration_cast;
using std::chrono::minutes;
using std::chrono::seconds;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::optional<double> parse_double(std::string_view text) {
  if (text.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const std::string owned{text};
    const double value = std::stod(owned, &used);
    if (used != owned.size() || !std::isfinite(value)) return std::nullopt;
    return value;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string_view trim_cr(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
    line.remove_suffix(1);
  }
  return line;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  });
}

std::optional<CheckinRecord> make_record(std::string user, std::string venue,
                                         std::string category,
                                         std::optional<GeoPoint> coord,
                                         std::string_view ts) {
  if (user.empty() || venue.empty()) return std::nullopt;
  if (coord && !valid_coordinates(coord->lat, coord->lon)) return std::nullopt;
  const auto parsed = parse_timestamp(ts);
  if (!parsed) return std::nullopt;
  CheckinRecord record;
  record.user_id = std::move(user);
  record.stay.poi_id = venue;
  record.stay.time = parsed->instant;
  record.poi.id = std::move(venue);
  record.poi.category = std::move(category);
  record.poi.coord = coord;
  return record;
}

std::optional<CheckinRecord> parse_jsonl(std::string_view line,
                                         bool canonical) {
  const json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (!obj.is_object()) return std::nullopt;
  const char* venue_key = canonical ? "venue" : "loc";
  const auto user = obj.find("user");
  const auto venue = obj.find(venue_key);
  const auto ts = obj.find("ts");
  if (user == obj.end() || venue == obj.end() || ts == obj.end() ||
      !user->is_string() || !ts->is_string()) {
    return std::nullopt;
  }
  std::string venue_id;
  if (venue->is_string()) {
    venue_id = venue->get<std::string>();
  } else if (venue->is_number_integer()) {
    venue_id = std::to_string(venue->get<long long>());
  } else {
    return std::nullopt;
  }
  std::string category;
  if (auto cat = obj.find("cat"); cat != obj.end()) {
    if (!cat->is_string()) return std::nullopt;
    category = cat->get<std::string>();
  }
  std::optional<GeoPoint> coord;
  const auto lat = obj.find("lat");
  const auto lon = obj.find("lon");
  const bool has_lat = lat != obj.end();
  const bool has_lon = lon != obj.end();
  if (canonical && (!has_lat || !has_lon)) return std::nullopt;
  if (has_lat != has_lon) return std::nullopt;
  if (has_lat) {
    if (!lat->is_number() || !lon->is_number()) return std::nullopt;
    coord = GeoPoint{lat->get<double>(), lon->get<double>()};
  }
  return make_record(user->get<std::string>(), std::move(venue_id),
                     std::move(category), coord,
                     ts->get_ref<const std::string&>());
}

std::optional<CheckinRecord> parse_tsv(std::string_view line) {
  const auto fields = split_tabs(line);
  if (fields.size() != 6) return std::nullopt;
  const auto lat = parse_double(fields[3]);
  const auto lon = parse_double(fields[4]);
  if (!lat || !lon) return std::nullopt;
  return make_record(std::string{fields[0]}, std::string{fields[1]},
                     std::string{fields[2]}, GeoPoint{*lat, *lon}, fields[5]);
}

void require_sorted(std::span<const Stay> stays) {
  for (std::size_t i = 1; i < stays.size(); ++i) {
    if (stays[i].time < stays[i - 1].time) {
      throw std::invalid_argument(
          fmt::format("stays are not sorted by timestamp (index {})", i));
    }
  }
}

int minutes_between(TimePoint from, TimePoint to) {
  return static_cast<int>(duration_cast<minutes>(to - from).count());
}

// Durations inside a session run up to the next stay; the last stay runs to
// the session boundary.
void assign_durations(Session& session, TimePoint boundary) {
  auto& stays = session.stays;
  for (std::size_t i = 0; i < stays.size(); ++i) {
    const TimePoint until = i + 1 < stays.size() ? stays[i + 1].time : boundary;
    stays[i].duration_minutes = std::max(0, minutes_between(stays[i].time, until));
  }
}

}  // namespace

bool valid_coordinates(double lat, double lon) {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 &&
         lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
}

std::optional<InputFormat> parse_input_format(std::string_view tag) {
  if (tag == "foursquare-tsv") return InputFormat::kFoursquareTsv;
  if (tag == "isp-jsonl") return InputFormat::kIspJsonl;
  if (tag == "canonical-jsonl") return InputFormat::kCanonicalJsonl;
  return std::nullopt;
}

std::string_view to_string(InputFormat format) {
  switch (format) {
    case InputFormat::kFoursquareTsv:
      return "foursquare-tsv";
    case InputFormat::kIspJsonl:
      return "isp-jsonl";
    case InputFormat::kCanonicalJsonl:
      return "canonical-jsonl";
  }
  return "unknown";
}

std::optional<CheckinRecord> parse_checkin_line(std::string_view line,
                                                InputFormat format) {
  line = trim_cr(line);
  switch (format) {
    case InputFormat::kFoursquareTsv:
      return parse_tsv(line);
    case InputFormat::kIspJsonl:
      return parse_jsonl(line, /*canonical=*/false);
    case InputFormat::kCanonicalJsonl:
      return parse_jsonl(line, /*canonical=*/true);
  }
  return std::nullopt;
}

LoadResult load_checkins(const std::filesystem::path& path, InputFormat format,
                         const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) {
    throw DataError(fmt::format("cannot read '{}'", path.string()));
  }
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    ++result.lines;
    if (auto record = parse_checkin_line(line, format)) {
      result.records.push_back(std::move(*record));
    } else {
      ++result.malformed;
      result.malformed_line_numbers.push_back(line_no);
    }
  }
  if (in.bad()) {
    throw DataError(fmt::format("read error on '{}'", path.string()));
  }
  const auto tolerated = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(
             options.max_malformed_fraction * static_cast<double>(result.lines))));
  if (result.malformed > tolerated) {
    std::string sample;
    for (std::size_t i = 0; i < std::min<std::size_t>(5, result.malformed); ++i) {
      sample += fmt::format("{}{}", i ? ", " : "", result.malformed_line_numbers[i]);
    }
    throw DataError(fmt::format(
        "'{}': {} of {} lines malformed (tolerance {}); first bad lines: {}",
        path.string(), result.malformed, result.lines, tolerated, sample));
  }
  return result;
}

LoadResult load_checkins(const std::filesystem::path& path,
                         std::string_view format_tag,
                         const LoadOptions& options) {
  const auto format = parse_input_format(format_tag);
  if (!format) {
    throw DataError(fmt::format("unknown input format '{}'", format_tag));
  }
  return load_checkins(path, *format, options);
}

std::optional<SessionMode> parse_session_mode(std::string_view tag) {
  if (tag == "anchored") return SessionMode::kAnchored;
  if (tag == "gap") return SessionMode::kGap;
  return std::nullopt;
}

std::vector<Session> split_sessions(std::span<const Stay> stays,
                                    std::chrono::seconds window,
                                    SessionMode mode, std::string user_id) {
  require_sorted(stays);
  std::vector<Session> sessions;
  for (const Stay& stay : stays) {
    bool open_new = sessions.empty();
    if (!open_new) {
      const Session& current = sessions.back();
      const TimePoint reference =
          mode == SessionMode::kAnchored ? current.start() : current.end();
      open_new = stay.time > reference + window;
    }
    if (open_new) sessions.push_back(Session{user_id, {}});
    sessions.back().stays.push_back(stay);
  }
  for (Session& session : sessions) {
    const TimePoint boundary = mode == SessionMode::kAnchored
                                   ? session.start() + window
                                   : session.end() + window;
    assign_durations(session, boundary);
  }
  return sessions;
}

UserSessions filter_dataset(const UserSessions& sessions,
                            const FilterThresholds& thresholds) {
  UserSessions retained;
  for (const auto& [user, list] : sessions) {
    std::vector<Session> kept;
    for (const Session& session : list) {
      if (session.stays.size() >= thresholds.min_stays_per_session) {
        kept.push_back(session);
      }
    }
    if (!kept.empty() && kept.size() >= thresholds.min_sessions_per_user) {
      retained.emplace(user, std::move(kept));
    }
  }
  return retained;
}

DatasetSplit split_dataset(const UserSessions& sessions,
                           const SplitRatios& ratios) {
  const double total = ratios.train + ratios.validation + ratios.test;
  if (std::abs(total - 1.0) > 1e-9 || ratios.train < 0 ||
      ratios.validation < 0 || ratios.test < 0) {
    throw std::invalid_argument(fmt::format(
        "split ratios {}:{}:{} must be non-negative and sum to 1", ratios.train,
        ratios.validation, ratios.test));
  }
  DatasetSplit split;
  for (const auto& [user, list] : sessions) {
    const std::size_t m = list.size();
    const auto share = [m](double ratio) {
      return static_cast<std::size_t>(
          std::floor(ratio * static_cast<double>(m) + 1e-9));
    };
    const std::size_t n_train = std::min(m, share(ratios.train));
    const std::size_t n_val = std::min(m - n_train, share(ratios.validation));
    for (std::size_t i = 0; i < m; ++i) {
      auto& bucket = i < n_train           ? split.train
                     : i < n_train + n_val ? split.validation
                                           : split.test;
      bucket.push_back(list[i]);
    }
  }
  return split;
}

std::vector<TestInstance> build_test_instances(const DatasetSplit& split,
                                               const InstanceOptions& options) {
  if (options.sample_n == 0) {
    throw std::invalid_argument("sample_n must be positive");
  }
  std::map<std::string, std::vector<const Session*>> prior;
  std::map<std::string, std::vector<const Session*>> tests;
  for (const Session& s : split.train) prior[s.user_id].push_back(&s);
  for (const Session& s : split.validation) prior[s.user_id].push_back(&s);
  for (const Session& s : split.test) tests[s.user_id].push_back(&s);

  std::vector<std::string> eligible;
  for (const auto& [user, list] : tests) {
    if (list.size() < options.min_test_sessions ||
        list.size() > options.max_test_sessions) {
      continue;
    }
    if (list.front()->stays.size() < 2) continue;
    eligible.push_back(user);
  }
  if (eligible.empty()) {
    throw DataError("no users are eligible for test instances");
  }

  std::vector<std::string> chosen = eligible;
  if (chosen.size() > options.sample_n) {
    std::mt19937_64 rng(options.seed);
    for (std::size_t i = 0; i < options.sample_n; ++i) {
      const std::size_t j = i + uniform_index(rng, chosen.size() - i);
      std::swap(chosen[i], chosen[j]);
    }
    chosen.resize(options.sample_n);
    std::sort(chosen.begin(), chosen.end());
  }

  std::vector<TestInstance> instances;
  instances.reserve(chosen.size());
  for (const std::string& user : chosen) {
    const Session& session = *tests[user].front();
    const auto& stays = session.stays;
    const std::size_t target_index = stays.size() - 1;
    const std::size_t context_begin =
        target_index > options.context_k ? target_index - options.context_k : 0;

    TestInstance instance;
    const auto prior_it = prior.find(user);
    const std::size_t prior_count =
        prior_it == prior.end() ? 0 : prior_it->second.size();
    instance.instance_id = fmt::format("{}#{}", user, prior_count);
    instance.user_id = user;
    instance.context.assign(stays.begin() + context_begin,
                            stays.begin() + target_index);
    instance.target = stays[target_index];
    instance.target.duration_minutes.reset();
    instance.target_poi = instance.target.poi_id;

    if (prior_it != prior.end() && options.history_len > 0) {
      // Walk earlier sessions newest-first, then restore order.
      std::vector<std::vector<Stay>> runs;
      std::size_t remaining = options.history_len;
      for (auto it = prior_it->second.rbegin();
           it != prior_it->second.rend() && remaining > 0; ++it) {
        const auto& src = (*it)->stays;
        const std::size_t take = std::min(remaining, src.size());
        runs.emplace_back(src.end() - static_cast<std::ptrdiff_t>(take),
                          src.end());
        remaining -= take;
      }
      for (auto it = runs.rbegin(); it != runs.rend(); ++it) {
        instance.historical.insert(instance.historical.end(), it->begin(),
                                   it->end());
        instance.historical_segments.push_back(it->size());
      }
    }
    instances.push_back(std::move(instance));
  }
  return instances;
}

std::vector<Session> preprocess_isp(std::span<const Stay> records,
                                    const IspOptions& options,
                                    std::string user_id) {
  require_sorted(records);
  std::vector<Session> sessions;
  std::optional<std::chrono::sys_days> current_day;
  for (const Stay& raw : records) {
    Stay stay = raw;
    stay.utc_offset = options.tz;
    const int hour = stay.hour();
    if (hour >= options.night_start_hour || hour < options.night_end_hour) {
      continue;
    }
    const auto day = local_day(stay.time, stay.utc_offset);
    if (!current_day || day != *current_day) {
      sessions.push_back(Session{user_id, {}});
      current_day = day;
    }
    auto& stays = sessions.back().stays;
    if (!stays.empty() && stays.back().poi_id == stay.poi_id &&
        stay.time - stays.back().time <= options.merge_window) {
      continue;
    }
    stays.push_back(std::move(stay));
  }
  for (Session& session : sessions) {
    assign_durations(session,
                     local_day_end(session.start(), session.stays[0].utc_offset));
  }
  return sessions;
}

std::optional<IdMode> parse_id_mode(std::string_view tag) {
  if (tag == "str") return IdMode::kStr;
  if (tag == "int") return IdMode::kInt;
  return std::nullopt;
}

EncodedDataset encode_location_ids(const UserSessions& sessions, IdMode mode) {
  EncodedDataset encoded{sessions, {}};
  if (mode == IdMode::kStr) return encoded;
  auto& map = encoded.id_map;
  for (auto& [user, list] : encoded.sessions) {
    for (Session& session : list) {
      for (Stay& stay : session.stays) {
        auto [it, inserted] = map.to_encoded.try_emplace(
            stay.poi_id, std::to_string(map.to_original.size()));
        if (inserted) map.to_original.push_back(stay.poi_id);
        stay.poi_id = it->second;
      }
    }
  }
  return encoded;
}

UserSessions decode_location_ids(const UserSessions& sessions,
                                 const IdMap& id_map) {
  UserSessions decoded = sessions;
  if (id_map.to_original.empty()) return decoded;
  for (auto& [user, list] : decoded) {
    for (Session& session : list) {
      for (Stay& stay : session.stays) {
        const auto index = std::stoull(stay.poi_id);
        if (index >= id_map.to_original.size()) {
          throw DataError(fmt::format("encoded id '{}' not in map", stay.poi_id));
        }
        stay.poi_id = id_map.to_original[index];
      }
    }
  }
  return decoded;
}

PoiCatalog encode_catalog(const PoiCatalog& catalog, const IdMap& id_map) {
  if (id_map.to_original.empty()) return catalog;
  PoiCatalog encoded;
  for (const auto& [id, poi] : catalog) {
    const auto it = id_map.to_encoded.find(id);
    if (it == id_map.to_encoded.end()) continue;
    Poi copy = poi;
    copy.id = it->second;
    encoded.emplace(copy.id, std::move(copy));
  }
  return encoded;
}

DatasetStats dataset_stats(const UserSessions& sessions) {
  DatasetStats stats;
  std::set<std::string> locations;
  std::optional<std::chrono::sys_days> first;
  std::optional<std::chrono::sys_days> last;
  for (const auto& [user, list] : sessions) {
    if (list.empty()) continue;
    ++stats.users;
    stats.trajectories += list.size();
    for (const Session& session : list) {
      stats.records += session.stays.size();
      for (const Stay& stay : session.stays) {
        locations.insert(stay.poi_id);
        const auto day = local_day(stay.time, stay.utc_offset);
        if (!first || day < *first) first = day;
        if (!last || day > *last) last = day;
      }
    }
  }
  stats.locations = locations.size();
  if (first) stats.days = static_cast<std::size_t>((*last - *first).count());
  return stats;
}

ProcessingProfile foursquare_profile() {
  ProcessingProfile profile;
  profile.name = "foursquare";
  return profile;
}

ProcessingProfile isp_profile() {
  ProcessingProfile profile;
  profile.name = "isp";
  profile.daily_sessions = true;
  profile.thresholds = FilterThresholds{2, 1};
  profile.ratios = kIspRatios;
  profile.min_test_sessions = 1;
  profile.max_test_sessions = 50;
  return profile;
}

std::optional<ProcessingProfile> profile_by_name(std::string_view name) {
  if (name == "foursquare") return foursquare_profile();
  if (name == "isp") return isp_profile();
  return std::nullopt;
}

std::map<std::string, std::vector<Stay>> group_by_user(
    std::span<const CheckinRecord> records) {
  std::map<std::string, std::vector<Stay>> grouped;
  for (const CheckinRecord& record : records) {
    grouped[record.user_id].push_back(record.stay);
  }
  for (auto& [user, stays] : grouped) {
    std::stable_sort(stays.begin(), stays.end(),
                     [](const Stay& a, const Stay& b) { return a.time < b.time; });
  }
  return grouped;
}

PreparedDataset preprocess(std::span<const CheckinRecord> records,
                           const ProcessingProfile& profile, UtcOffset tz,
                           IdMode id_mode) {
  UserSessions sessions;
  for (auto& [user, stays] : group_by_user(records)) {
    for (Stay& stay : stays) stay.utc_offset = tz;
    if (profile.daily_sessions) {
      IspOptions isp = profile.isp;
      isp.tz = tz;
      sessions.emplace(user, preprocess_isp(stays, isp, user));
    } else {
      sessions.emplace(user, split_sessions(stays, profile.window,
                                            profile.session_mode, user));
    }
  }

  PoiCatalog catalog;
  for (const CheckinRecord& record : records) {
    auto [it, inserted] = catalog.try_emplace(record.poi.id, record.poi);
    if (inserted) continue;
    Poi& poi = it->second;
    if (poi.category.empty()) poi.category = record.poi.category;
    if (!poi.coord) poi.coord = record.poi.coord;
    if (poi.address.empty()) poi.address = record.poi.address;
  }

  PreparedDataset prepared;
  prepared.profile = profile;
  prepared.id_mode = id_mode;
  auto encoded =
      encode_location_ids(filter_dataset(sessions, profile.thresholds), id_mode);
  prepared.sessions = std::move(encoded.sessions);
  prepared.id_map = std::move(encoded.id_map);

  std::set<std::string> retained;
  for (const auto& [user, list] : prepared.sessions) {
    for (const Session& s : list) {
      for (const Stay& stay : s.stays) retained.insert(stay.poi_id);
    }
  }
  for (const auto& [id, poi] : encode_catalog(catalog, prepared.id_map)) {
    if (retained.count(id)) prepared.catalog.emplace(id, poi);
  }
  prepared.split = split_dataset(prepared.sessions, profile.ratios);
  prepared.stats = dataset_stats(prepared.sessions);
  return prepared;
}

}  // namespace mobcast
