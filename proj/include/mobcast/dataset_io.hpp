#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mobcast/trajectory.hpp"

namespace mobcast {

// Layout of a preprocessed dataset directory.
inline constexpr std::string_view kTrainFile = "sessions_train.jsonl";
inline constexpr std::string_view kValidationFile = "sessions_validation.jsonl";
inline constexpr std::string_view kTestFile = "sessions_test.jsonl";
inline constexpr std::string_view kPoiFile = "pois.jsonl";
inline constexpr std::string_view kStatsFile = "stats.json";
inline constexpr std::string_view kProfileFile = "profile.json";
inline constexpr std::string_view kIdMapFile = "id_map.json";

nlohmann::ordered_json to_json(const Stay& stay);
nlohmann::ordered_json to_json(const Session& session);
nlohmann::ordered_json to_json(const Poi& poi);
nlohmann::ordered_json to_json(const DatasetStats& stats);
Stay stay_from_json(const nlohmann::json& j);
Session session_from_json(const nlohmann::json& j);
Poi poi_from_json(const nlohmann::json& j);

struct LoadedDataset {
  ProcessingProfile profile;
  DatasetSplit split;
  PoiCatalog catalog;
  IdMap id_map;
  DatasetStats stats;
};

void write_dataset(const std::filesystem::path& dir,
                   const PreparedDataset& dataset);
LoadedDataset read_dataset(const std::filesystem::path& dir);

// Emits records in one of the ingestion formats (foursquare-tsv uses RFC3339
// timestamps).
void write_checkins(std::ostream& out, std::span<const CheckinRecord> records,
                    InputFormat format);

// Writes to a sibling temporary and renames over `path`.
void write_text_atomic(const std::filesystem::path& path,
                       std::string_view content);
std::string read_text(const std::filesystem::path& path);

}  // namespace mobcast
