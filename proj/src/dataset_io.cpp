#include "mobcast/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace mobcast {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void write_sessions(const fs::path& path, std::span<const Session> sessions) {
  std::string text;
  for (const Session& session : sessions) {
    text += to_json(session).dump();
    text += '\n';
  }
  write_text_atomic(path, text);
}

std::vector<Session> read_sessions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read '{}'", path.string()));
  std::vector<Session> sessions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      sessions.push_back(session_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError(
          fmt::format("{}:{}: bad session record: {}", path.string(), line_no,
                      e.what()));
    }
  }
  return sessions;
}

}  // namespace

ordered_json to_json(const Stay& stay) {
  ordered_json j;
  j["venue"] = stay.poi_id;
  j["ts"] = format_rfc3339(stay.time, stay.utc_offset);
  if (stay.duration_minutes) {
    j["duration"] = *stay.duration_minutes;
  } else {
    j["duration"] = nullptr;
  }
  return j;
}

ordered_json to_json(const Session& session) {
  ordered_json j;
  j["user"] = session.user_id;
  j["stays"] = ordered_json::array();
  for (const Stay& stay : session.stays) j["stays"].push_back(to_json(stay));
  return j;
}

ordered_json to_json(const Poi& poi) {
  ordered_json j;
  j["id"] = poi.id;
  j["cat"] = poi.category;
  if (poi.coord) {
    j["lat"] = poi.coord->lat;
    j["lon"] = poi.coord->lon;
  }
  if (!poi.address.empty()) j["addr"] = poi.address;
  return j;
}

ordered_json to_json(const DatasetStats& stats) {
  ordered_json j;
  j["users"] = stats.users;
  j["trajectories"] = stats.trajectories;
  j["locations"] = stats.locations;
  j["days"] = stats.days;
  j["records"] = stats.records;
  return j;
}

Stay stay_from_json(const json& j) {
  Stay stay;
  stay.poi_id = j.at("venue").get<std::string>();
  const auto parsed = parse_rfc3339(j.at("ts").get<std::string>());
  if (!parsed) throw DataError("bad timestamp in stay record");
  stay.time = parsed->instant;
  stay.utc_offset = parsed->offset;
  if (auto d = j.find("duration"); d != j.end() && !d->is_null()) {
    stay.duration_minutes = d->get<int>();
  }
  return stay;
}

Session session_from_json(const json& j) {
  Session session;
  session.user_id = j.at("user").get<std::string>();
  for (const auto& s : j.at("stays")) session.stays.push_back(stay_from_json(s));
  if (session.stays.empty()) throw DataError("session without stays");
  return session;
}

Poi poi_from_json(const json& j) {
  Poi poi;
  poi.id = j.at("id").get<std::string>();
  poi.category = j.value("cat", "");
  if (j.contains("lat") && j.contains("lon")) {
    poi.coord = GeoPoint{j.at("lat").get<double>(), j.at("lon").get<double>()};
  }
  poi.address = j.value("addr", "");
  return poi;
}

void write_dataset(const fs::path& dir, const PreparedDataset& dataset) {
  fs::create_directories(dir);
  write_sessions(dir / kTrainFile, dataset.split.train);
  write_sessions(dir / kValidationFile, dataset.split.validation);
  write_sessions(dir / kTestFile, dataset.split.test);

  std::string pois;
  for (const auto& [id, poi] : dataset.catalog) {
    pois += to_json(poi).dump();
    pois += '\n';
  }
  write_text_atomic(dir / kPoiFile, pois);
  write_text_atomic(dir / kStatsFile, to_json(dataset.stats).dump(2) + "\n");

  ordered_json profile;
  profile["name"] = dataset.profile.name;
  profile["min_test_sessions"] = dataset.profile.min_test_sessions;
  profile["max_test_sessions"] = dataset.profile.max_test_sessions;
  profile["id_mode"] = dataset.id_mode == IdMode::kInt ? "int" : "str";
  write_text_atomic(dir / kProfileFile, profile.dump(2) + "\n");

  if (dataset.id_mode == IdMode::kInt) {
    ordered_json ids;
    ids["ids"] = dataset.id_map.to_original;
    write_text_atomic(dir / kIdMapFile, ids.dump() + "\n");
  }
}

LoadedDataset read_dataset(const fs::path& dir) {
  LoadedDataset loaded;
  const auto profile_json = json::parse(read_text(dir / kProfileFile));
  const auto name = profile_json.value("name", "foursquare");
  auto profile = profile_by_name(name);
  if (!profile) throw DataError(fmt::format("unknown profile '{}'", name));
  loaded.profile = *profile;
  loaded.profile.min_test_sessions =
      profile_json.value("min_test_sessions", loaded.profile.min_test_sessions);
  loaded.profile.max_test_sessions =
      profile_json.value("max_test_sessions", loaded.profile.max_test_sessions);

  loaded.split.train = read_sessions(dir / kTrainFile);
  loaded.split.validation = read_sessions(dir / kValidationFile);
  loaded.split.test = read_sessions(dir / kTestFile);

  std::ifstream pois(dir / kPoiFile);
  if (!pois) throw DataError(fmt::format("cannot read '{}'", (dir / kPoiFile).string()));
  std::string line;
  while (std::getline(pois, line)) {
    if (line.empty()) continue;
    Poi poi = poi_from_json(json::parse(line));
    loaded.catalog.emplace(poi.id, std::move(poi));
  }

  if (fs::exists(dir / kIdMapFile)) {
    const auto ids = json::parse(read_text(dir / kIdMapFile));
    loaded.id_map.to_original = ids.at("ids").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < loaded.id_map.to_original.size(); ++i) {
      loaded.id_map.to_encoded.emplace(loaded.id_map.to_original[i],
                                       std::to_string(i));
    }
  }
  if (fs::exists(dir / kStatsFile)) {
    const auto s = json::parse(read_text(dir / kStatsFile));
    loaded.stats = DatasetStats{s.value("users", 0u), s.value("trajectories", 0u),
                                s.value("locations", 0u), s.value("days", 0u),
                                s.value("records", 0u)};
  }
  return loaded;
}

void write_checkins(std::ostream& out, std::span<const CheckinRecord> records,
                    InputFormat format) {
  for (const CheckinRecord& r : records) {
    const std::string ts = format_rfc3339(r.stay.time, UtcOffset{0});
    switch (format) {
      case InputFormat::kFoursquareTsv:
        out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", r.user_id, r.stay.poi_id,
                           r.poi.category, r.poi.coord ? r.poi.coord->lat : 0.0,
                           r.poi.coord ? r.poi.coord->lon : 0.0, ts);
        break;
      case InputFormat::kCanonicalJsonl:
      case InputFormat::kIspJsonl: {
        const bool canonical = format == InputFormat::kCanonicalJsonl;
        ordered_json j;
        j["user"] = r.user_id;
        j[canonical ? "venue" : "loc"] = r.stay.poi_id;
        if (canonical) j["cat"] = r.poi.category;
        if (r.poi.coord) {
          j["lat"] = r.poi.coord->lat;
          j["lon"] = r.poi.coord->lon;
        } else if (canonical) {
          j["lat"] = 0.0;
          j["lon"] = 0.0;
        }
        j["ts"] = ts;
        out << j.dump() << '\n';
        break;
      }
    }
  }
}

void write_text_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw DataError(fmt::format("short write on '{}'", tmp.string()));
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace mobcast
