#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mobcast/http.hpp"
#include "mobcast/llm.hpp"
#include "mobcast/trajectory.hpp"

namespace mobcast {

struct StructuredAddress {
  std::optional<std::string> administrative;
  std::optional<std::string> subdistrict;
  std::optional<std::string> street;
  std::optional<std::string> poi;

  bool empty() const {
    return !administrative && !subdistrict && !street && !poi;
  }
  bool operator==(const StructuredAddress&) const = default;
};

struct CandidatePlaces {
  std::vector<std::string> subdistricts;
  std::vector<std::string> pois;
  std::size_t explore_num = 5;

  bool operator==(const CandidatePlaces&) const = default;
};

// ---------------------------------------------------------------------------
// Reverse geocoding

struct GeocoderConfig {
  // Full reverse endpoint, e.g. https://nominatim.openstreetmap.org/reverse.
  // Empty means offline: every uncached lookup fails without a request.
  std::string base_url;
  std::string email;
  std::string user_agent = "mobcast/0.1 (next-location prediction research)";
  RetryPolicy retry{3, std::chrono::milliseconds{1000}, 2.0,
                    std::chrono::milliseconds{8000}};
  std::chrono::milliseconds min_interval{1000};
  std::filesystem::path cache_path;  // empty: in-memory cache only
};

enum class GeocodeStatus {
  kFound,
  kNotFound,      // permanent failure, cached as an empty address
  kLookupFailed,  // transient failure, not cached
};

struct GeocodeResult {
  GeocodeStatus status = GeocodeStatus::kLookupFailed;
  std::string display_name;
  bool from_cache = false;
};

// "lat,lon" rounded to five decimals.
std::string geocode_cache_key(double lat, double lon);

class ReverseGeocoder {
 public:
  ReverseGeocoder(GeocoderConfig config, std::shared_ptr<HttpClient> http,
                  Sleeper sleeper = real_sleeper());

  // Throws std::invalid_argument on out-of-range coordinates.
  GeocodeResult reverse_geocode(double lat, double lon);

  std::size_t network_requests() const { return requests_.load(); }
  std::size_t cache_size() const;

 private:
  std::optional<GeocodeResult> cached(const std::string& key) const;
  void store(const std::string& key, const std::string& display_name);

  GeocoderConfig config_;
  std::shared_ptr<HttpClient> http_;
  Sleeper sleeper_;
  RateLimiter limiter_;
  mutable std::shared_mutex cache_mutex_;
  std::map<std::string, std::string> cache_;
  std::mutex network_mutex_;
  std::atomic<std::size_t> requests_{0};
};

// ---------------------------------------------------------------------------
// LLM-driven address structuring and candidate generation

std::string extraction_prompt(std::string_view raw_address);

// Parses the first JSON object in `text`; nullopt when none carries a usable
// field.
std::optional<StructuredAddress> parse_structured_address(std::string_view text);

// Asks once, re-asks once on unusable output. Throws std::invalid_argument on
// empty input; provider errors propagate.
std::optional<StructuredAddress> extract_structured_address(
    std::string_view raw_address, ChatProvider& llm);

std::string subdistrict_prompt(std::span<const StructuredAddress> trajectory,
                               std::size_t explore_num);
std::string poi_prompt(std::span<const StructuredAddress> trajectory,
                       std::span<const std::string> subdistricts,
                       std::size_t explore_num);

// One candidate per line; list markers stripped, duplicates dropped, cut to
// explore_num. A JSON array of strings is accepted too.
std::vector<std::string> parse_candidate_lines(std::string_view text,
                                               std::size_t explore_num);

std::vector<std::string> generate_subdistrict_candidates(
    std::span<const StructuredAddress> trajectory, std::size_t explore_num,
    ChatProvider& llm);

std::vector<std::string> generate_poi_candidates(
    std::span<const StructuredAddress> trajectory,
    std::span<const std::string> subdistricts, std::size_t explore_num,
    ChatProvider& llm);

std::string render_world_prompt(const CandidatePlaces& candidates);

struct WorldOptions {
  std::size_t explore_num = 5;
};

// Per-instance candidate generation over the context stays. Structured
// addresses are cached per location id for the lifetime of the object.
class WorldKnowledge {
 public:
  WorldKnowledge(ReverseGeocoder* geocoder, ChatProvider& llm,
                 WorldOptions options = {});

  std::optional<StructuredAddress> address_of(const std::string& poi_id,
                                              const PoiCatalog& catalog);
  CandidatePlaces candidates_for(const TestInstance& instance,
                                 const PoiCatalog& catalog);

 private:
  std::optional<std::string> raw_address(const Poi& poi);

  ReverseGeocoder* geocoder_;
  ChatProvider& llm_;
  WorldOptions options_;
  std::mutex cache_mutex_;
  std::map<std::string, std::optional<StructuredAddress>> extracted_;
};

}  // namespace mobcast
