#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mobcast/time.hpp"

namespace mobcast {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

bool valid_coordinates(double lat, double lon);

struct Poi {
  std::string id;
  std::string category;
  std::optional<GeoPoint> coord;
  std::string address;
};

using PoiCatalog = std::map<std::string, Poi>;

struct Stay {
  std::string poi_id;
  TimePoint time;
  // Offset used for every local-time view of this stay.
  UtcOffset utc_offset{0};
  std::optional<int> duration_minutes;

  std::string start_time() const { return clock_12h(time, utc_offset); }
  std::string_view day_of_week() const {
    return weekday_name(time, utc_offset);
  }
  int hour() const { return local_hour(time, utc_offset); }
  bool weekend() const { return is_weekend(time, utc_offset); }

  bool operator==(const Stay&) const = default;
};

struct Session {
  std::string user_id;
  std::vector<Stay> stays;

  TimePoint start() const { return stays.front().time; }
  TimePoint end() const { return stays.back().time; }
  bool operator==(const Session&) const = default;
};

// Sessions keyed by user, each user's list in chronological order.
using UserSessions = std::map<std::string, std::vector<Session>>;

struct DatasetSplit {
  std::vector<Session> train;
  std::vector<Session> validation;
  std::vector<Session> test;
};

struct TestInstance {
  std::string instance_id;
  std::string user_id;
  std::vector<Stay> historical;
  // Lengths of the contiguous session runs that make up `historical`.
  std::vector<std::size_t> historical_segments;
  std::vector<Stay> context;
  // Target stay with its place withheld from prompts; duration is unset.
  Stay target;
  std::string target_poi;

  std::string target_start_time() const { return target.start_time(); }
  std::string_view target_day_of_week() const { return target.day_of_week(); }
};

// ---------------------------------------------------------------------------
// Ingestion

enum class InputFormat { kFoursquareTsv, kIspJsonl, kCanonicalJsonl };

std::optional<InputFormat> parse_input_format(std::string_view tag);
std::string_view to_string(InputFormat format);

struct CheckinRecord {
  std::string user_id;
  Stay stay;
  Poi poi;
};

struct LoadResult {
  std::vector<CheckinRecord> records;
  std::size_t lines = 0;      // non-empty lines seen
  std::size_t malformed = 0;  // lines that failed to parse
  std::vector<std::size_t> malformed_line_numbers;  // 1-based
};

struct LoadOptions {
  // Aborts when malformed > max(1, floor(fraction * lines)).
  double max_malformed_fraction = 0.01;
};

LoadResult load_checkins(const std::filesystem::path& path, InputFormat format,
                         const LoadOptions& options = {});
// Throws DataError on an unknown format tag.
LoadResult load_checkins(const std::filesystem::path& path,
                         std::string_view format_tag,
                         const LoadOptions& options = {});

// Parses one line; nullopt when malformed.
std::optional<CheckinRecord> parse_checkin_line(std::string_view line,
                                                InputFormat format);

// ---------------------------------------------------------------------------
// Session construction and filtering

enum class SessionMode {
  // A session starts at its first stay; a stay later than start + window
  // opens a new one.
  kAnchored,
  // A new session starts when the gap to the previous stay exceeds window.
  kGap,
};

std::optional<SessionMode> parse_session_mode(std::string_view tag);

// Durations are filled in as minutes to the next stay, capped at the session
// boundary. Throws std::invalid_argument on unsorted input.
std::vector<Session> split_sessions(
    std::span<const Stay> stays,
    std::chrono::seconds window = std::chrono::hours{72},
    SessionMode mode = SessionMode::kAnchored, std::string user_id = {});

struct FilterThresholds {
  std::size_t min_stays_per_session = 4;
  std::size_t min_sessions_per_user = 5;
};

// Drops short sessions first, then users left with too few sessions.
UserSessions filter_dataset(const UserSessions& sessions,
                            const FilterThresholds& thresholds = {});

struct SplitRatios {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

inline constexpr SplitRatios kFoursquareRatios{0.7, 0.1, 0.2};
inline constexpr SplitRatios kIspRatios{0.4, 0.1, 0.5};

// Per-user chronological split: floor(train * m) sessions to train,
// floor(validation * m) to validation, the remainder to test. Users are
// emitted in id order. Throws std::invalid_argument when the ratios do not
// sum to 1 within 1e-9.
DatasetSplit split_dataset(const UserSessions& sessions,
                           const SplitRatios& ratios = kFoursquareRatios);

struct InstanceOptions {
  std::size_t context_k = 5;
  std::size_t history_len = 15;
  std::size_t sample_n = 200;
  std::uint64_t seed = 0;
  std::size_t min_test_sessions = 3;
  std::size_t max_test_sessions = 50;
};

// One instance per eligible user, built from that user's earliest test
// session. Users are sampled uniformly without replacement when more are
// eligible than sample_n; output is in user-id order.
std::vector<TestInstance> build_test_instances(const DatasetSplit& split,
                                               const InstanceOptions& options);

struct IspOptions {
  UtcOffset tz{8 * 60};
  std::chrono::seconds merge_window = std::chrono::hours{2};
  int night_start_hour = 20;
  int night_end_hour = 8;
};

// Daily sessions for one user's raw ISP trace. Throws std::invalid_argument
// on unsorted input.
std::vector<Session> preprocess_isp(std::span<const Stay> records,
                                    const IspOptions& options = {},
                                    std::string user_id = {});

// ---------------------------------------------------------------------------
// Location id encoding

enum class IdMode { kStr, kInt };

std::optional<IdMode> parse_id_mode(std::string_view tag);

struct IdMap {
  std::map<std::string, std::string> to_encoded;
  std::vector<std::string> to_original;  // index = encoded integer

  bool operator==(const IdMap&) const = default;
};

struct EncodedDataset {
  UserSessions sessions;
  IdMap id_map;  // empty in str mode
};

EncodedDataset encode_location_ids(const UserSessions& sessions, IdMode mode);
UserSessions decode_location_ids(const UserSessions& sessions,
                                 const IdMap& id_map);
PoiCatalog encode_catalog(const PoiCatalog& catalog, const IdMap& id_map);

// ---------------------------------------------------------------------------
// Statistics

struct DatasetStats {
  std::size_t users = 0;
  std::size_t trajectories = 0;
  std::size_t locations = 0;
  std::size_t days = 0;
  std::size_t records = 0;

  bool operator==(const DatasetStats&) const = default;
};

// `days` is the number of calendar days between the first and last stay.
DatasetStats dataset_stats(const UserSessions& sessions);

// ---------------------------------------------------------------------------
// Profiles and the end-to-end preprocessing pipeline

struct ProcessingProfile {
  std::string name;
  bool daily_sessions = false;  // ISP: one session per local calendar day
  std::chrono::seconds window = std::chrono::hours{72};
  SessionMode session_mode = SessionMode::kAnchored;
  FilterThresholds thresholds;
  SplitRatios ratios = kFoursquareRatios;
  std::size_t min_test_sessions = 3;
  std::size_t max_test_sessions = 50;
  IspOptions isp;
};

ProcessingProfile foursquare_profile();
ProcessingProfile isp_profile();
std::optional<ProcessingProfile> profile_by_name(std::string_view name);

struct PreparedDataset {
  ProcessingProfile profile;
  UserSessions sessions;  // retained sessions, post-filter, encoded
  DatasetSplit split;
  PoiCatalog catalog;
  IdMap id_map;
  IdMode id_mode = IdMode::kStr;
  DatasetStats stats;
};

// Groups records per user, applies `tz` to every stay, sessionizes, filters,
// encodes ids, and splits.
PreparedDataset preprocess(std::span<const CheckinRecord> records,
                           const ProcessingProfile& profile, UtcOffset tz,
                           IdMode id_mode = IdMode::kStr);

// Stays per user in timestamp order (stable for equal timestamps).
std::map<std::string, std::vector<Stay>> group_by_user(
    std::span<const CheckinRecord> records);

}  // namespace mobcast
