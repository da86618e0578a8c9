#include "mobcast/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

namespace mobcast {
namespace {

using json = nlohmann::json;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string{s.substr(first, last - first + 1)};
}

double round5(double v) {
  const double r = std::round(v * 1e5) / 1e5;
  return r == 0.0 ? 0.0 : r;  // folds -0
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string or_none(std::string text) { return text.empty() ? "(none)" : text; }

std::optional<std::string> trimmed_field(const json& object, const char* key) {
  const auto it = object.find(key);
  if (it == object.end() || !it->is_string()) return std::nullopt;
  std::string value = trim(it->get_ref<const std::string&>());
  if (value.empty()) return std::nullopt;
  return value;
}

std::string coordinates_text(const GeoPoint& p) {
  return fmt::format("latitude {:.5f}, longitude {:.5f}", p.lat, p.lon);
}

}  // namespace

std::string geocode_cache_key(double lat, double lon) {
  return fmt::format("{:.5f},{:.5f}", round5(lat), round5(lon));
}

ReverseGeocoder::ReverseGeocoder(GeocoderConfig config,
                                 std::shared_ptr<HttpClient> http,
                                 Sleeper sleeper)
    : config_(std::move(config)),
      http_(std::move(http)),
      sleeper_(std::move(sleeper)),
      limiter_(config_.min_interval) {
  if (config_.cache_path.empty() || !std::filesystem::exists(config_.cache_path)) {
    return;
  }
  std::ifstream in(config_.cache_path);
  for (std::string line; std::getline(in, line);) {
    const json record = json::parse(line, nullptr, false);
    if (!record.is_object()) continue;
    const auto key = record.find("key");
    const auto name = record.find("display_name");
    if (key == record.end() || !key->is_string()) continue;
    cache_[key->get<std::string>()] =
        name != record.end() && name->is_string() ? name->get<std::string>() : "";
  }
}

std::size_t ReverseGeocoder::cache_size() const {
  std::shared_lock lock(cache_mutex_);
  return cache_.size();
}

std::optional<GeocodeResult> ReverseGeocoder::cached(const std::string& key) const {
  std::shared_lock lock(cache_mutex_);
  const auto it = cache_.find(key);
  if (it == cache_.end()) return std::nullopt;
  GeocodeResult result;
  result.status = it->second.empty() ? GeocodeStatus::kNotFound
                                     : GeocodeStatus::kFound;
  result.display_name = it->second;
  result.from_cache = true;
  return result;
}

void ReverseGeocoder::store(const std::string& key,
                            const std::string& display_name) {
  std::unique_lock lock(cache_mutex_);
  cache_[key] = display_name;
  if (config_.cache_path.empty()) return;
  nlohmann::ordered_json record;
  record["key"] = key;
  record["display_name"] = display_name;
  record["fetched_at"] = format_rfc3339(
      std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
  std::ofstream out(config_.cache_path, std::ios::app);
  out << record.dump() << '\n';
  out.flush();
}

GeocodeResult ReverseGeocoder::reverse_geocode(double lat, double lon) {
  if (!valid_coordinates(lat, lon)) {
    throw std::invalid_argument(
        fmt::format("invalid coordinates ({}, {})", lat, lon));
  }
  const std::string key = geocode_cache_key(lat, lon);
  if (auto hit = cached(key)) return *hit;
  if (config_.base_url.empty()) return {};

  std::lock_guard network(network_mutex_);
  if (auto hit = cached(key)) return *hit;  // filled while we waited

  std::string url = config_.base_url;
  url += url.find('?') == std::string::npos ? '?' : '&';
  url += fmt::format("lat={:.5f}&lon={:.5f}&format=jsonv2&zoom=18", round5(lat),
                     round5(lon));
  if (!config_.email.empty()) url += "&email=" + url_encode(config_.email);
  const HttpHeaders headers{{"User-Agent", config_.user_agent}};

  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    limiter_.acquire();
    ++requests_;
    const HttpResponse response = http_->get(url, headers);
    if (response.status == 200) {
      const json body = json::parse(response.body, nullptr, false);
      std::string name;
      if (body.is_object() && !body.contains("error")) {
        name = trimmed_field(body, "display_name").value_or("");
      }
      store(key, name);
      GeocodeResult result;
      result.status = name.empty() ? GeocodeStatus::kNotFound : GeocodeStatus::kFound;
      result.display_name = name;
      return result;
    }
    if (!is_retryable_status(response)) {
      store(key, "");
      return {GeocodeStatus::kNotFound, "", false};
    }
    if (attempt < config_.retry.max_attempts) {
      sleeper_(config_.retry.backoff_after(attempt));
    }
  }
  return {GeocodeStatus::kLookupFailed, "", false};
}

std::string extraction_prompt(std::string_view raw_address) {
  return fmt::format(
      "{}\n"
      "Please get the administrative area name, subdistrict name/neighbourhood "
      "name, access road or feeder road name, building name/POI name.\n"
      "Present your answer in a JSON object with:'administrative' (the "
      "administrative area name) ,'subdistrict' (subdistrict "
      "name/neighbourhood name),'poi'(building name/POI name),'street'(access "
      "road or feeder road name which POI/building is on).\n"
      "Do not include the key if information is not given.Do not output other "
      "content.",
      raw_address);
}

std::optional<StructuredAddress> parse_structured_address(std::string_view text) {
  const auto object = first_json_object(text);
  if (!object) return std::nullopt;
  StructuredAddress address;
  address.administrative = trimmed_field(*object, "administrative");
  address.subdistrict = trimmed_field(*object, "subdistrict");
  address.street = trimmed_field(*object, "street");
  address.poi = trimmed_field(*object, "poi");
  if (address.empty()) return std::nullopt;
  return address;
}

std::optional<StructuredAddress> extract_structured_address(
    std::string_view raw_address, ChatProvider& llm) {
  if (trim(raw_address).empty()) {
    throw std::invalid_argument("empty address text");
  }
  const std::string prompt = extraction_prompt(raw_address);
  for (int ask = 0; ask < 2; ++ask) {
    if (auto address = parse_structured_address(llm.complete(prompt))) {
      return address;
    }
  }
  return std::nullopt;
}

std::string subdistrict_prompt(std::span<const StructuredAddress> trajectory,
                               std::size_t explore_num) {
  std::vector<std::string> areas;
  std::set<std::string> seen;
  std::vector<std::string> visited;
  for (const auto& address : trajectory) {
    if (address.administrative && seen.insert(*address.administrative).second) {
      areas.push_back(*address.administrative);
    }
    if (address.subdistrict) visited.push_back(*address.subdistrict);
  }
  return fmt::format(
      "This trajectory moves within following administrative areas:\n"
      "{}\n"
      "This trajectory sequentially visited following subdistricts, with the "
      "last subdistrict being the most recently visited:{}\n"
      "Consider about following two aspects:\n"
      "1.The frequency each subdistrict is visited.\n"
      "2.Transition probability between two administrative areas.\n"
      "Please predict the next subdistrict in the trajectory. Give {} "
      "subdistricts that are relatively likely to be visited. Do not output "
      "other content.",
      or_none(join(areas, ", ")), join(visited, ", "), explore_num);
}

std::string poi_prompt(std::span<const StructuredAddress> trajectory,
                       std::span<const std::string> subdistricts,
                       std::size_t explore_num) {
  std::vector<std::string> pois;
  for (const auto& address : trajectory) {
    if (address.poi && address.street) {
      pois.push_back(*address.poi + ", " + *address.street);
    } else if (address.poi) {
      pois.push_back(*address.poi);
    } else if (address.street) {
      pois.push_back(*address.street);
    }
  }
  std::string conditioning;
  if (!subdistricts.empty()) {
    conditioning = fmt::format(
        "The next subdistrict is likely to be one of: {}.\n",
        join(subdistricts, ", "));
  }
  return fmt::format(
      "This trajectory sequentially visited following POIs(Each POI is "
      "represented by 'POI name, the feeder road or access road it is on'), "
      "with the last POI being the most recently visited:{})\n"
      "{}"
      "Consider about following two aspects:\n"
      "1.The frequency each subdistrict is visited.\n"
      "2.The frequency each poi is visited.\n"
      "3.Transition probability between two subdistricts.\n"
      "4.Transition probability between two pois.\n"
      "Please predict the next poi in the trajectory.Give {} POIs that are "
      "relatively likely to be visited. Do not output other content.",
      join(pois, "; "), conditioning, explore_num);
}

std::vector<std::string> parse_candidate_lines(std::string_view text,
                                               std::size_t explore_num) {
  std::vector<std::string> raw;
  const std::string whole = trim(text);
  const json array = whole.starts_with('[')
                         ? json::parse(whole, nullptr, false)
                         : json(json::value_t::discarded);
  if (array.is_array()) {
    for (const auto& item : array) {
      if (item.is_string()) raw.push_back(item.get<std::string>());
    }
  } else {
    std::size_t start = 0;
    while (start <= whole.size()) {
      auto nl = whole.find('\n', start);
      if (nl == std::string::npos) nl = whole.size();
      raw.push_back(whole.substr(start, nl - start));
      start = nl + 1;
    }
  }

  static const std::regex kMarker(R"(^\s*(?:[-*]+|\d+[.)]|•)\s*)");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& line : raw) {
    std::string item = trim(std::regex_replace(line, kMarker, ""));
    if (item.size() >= 2 && item.front() == '"' && item.back() == '"') {
      item = trim(std::string_view{item}.substr(1, item.size() - 2));
    }
    if (item.empty() || !seen.insert(item).second) continue;
    out.push_back(std::move(item));
    if (out.size() == explore_num) break;
  }
  return out;
}

std::vector<std::string> generate_subdistrict_candidates(
    std::span<const StructuredAddress> trajectory, std::size_t explore_num,
    ChatProvider& llm) {
  if (explore_num < 1) throw std::invalid_argument("explore_num must be >= 1");
  return parse_candidate_lines(llm.complete(subdistrict_prompt(trajectory, explore_num)),
                               explore_num);
}

std::vector<std::string> generate_poi_candidates(
    std::span<const StructuredAddress> trajectory,
    std::span<const std::string> subdistricts, std::size_t explore_num,
    ChatProvider& llm) {
  if (explore_num < 1) throw std::invalid_argument("explore_num must be >= 1");
  return parse_candidate_lines(
      llm.complete(poi_prompt(trajectory, subdistricts, explore_num)), explore_num);
}

std::string render_world_prompt(const CandidatePlaces& candidates) {
  return fmt::format(
      "### Names of subdistricts that are relatively likely to be visited:\n"
      "{}\n"
      "### Names of POIs that are relatively likely to be visited:\n"
      "{}",
      or_none(join(candidates.subdistricts, ", ")),
      or_none(join(candidates.pois, "; ")));
}

WorldKnowledge::WorldKnowledge(ReverseGeocoder* geocoder, ChatProvider& llm,
                               WorldOptions options)
    : geocoder_(geocoder), llm_(llm), options_(options) {}

std::optional<std::string> WorldKnowledge::raw_address(const Poi& poi) {
  if (!trim(poi.address).empty()) return poi.address;
  if (!poi.coord) return std::nullopt;
  if (geocoder_) {
    const auto result = geocoder_->reverse_geocode(poi.coord->lat, poi.coord->lon);
    if (result.status == GeocodeStatus::kFound) return result.display_name;
  }
  return coordinates_text(*poi.coord);
}

std::optional<StructuredAddress> WorldKnowledge::address_of(
    const std::string& poi_id, const PoiCatalog& catalog) {
  {
    std::lock_guard lock(cache_mutex_);
    if (const auto it = extracted_.find(poi_id); it != extracted_.end()) {
      return it->second;
    }
  }
  std::optional<StructuredAddress> address;
  if (const auto poi = catalog.find(poi_id); poi != catalog.end()) {
    if (const auto raw = raw_address(poi->second)) {
      address = extract_structured_address(*raw, llm_);
    }
  }
  std::lock_guard lock(cache_mutex_);
  return extracted_.emplace(poi_id, address).first->second;
}

CandidatePlaces WorldKnowledge::candidates_for(const TestInstance& instance,
                                               const PoiCatalog& catalog) {
  CandidatePlaces candidates;
  candidates.explore_num = options_.explore_num;
  std::vector<StructuredAddress> trajectory;
  for (const auto& stay : instance.context) {
    if (auto address = address_of(stay.poi_id, catalog)) {
      trajectory.push_back(std::move(*address));
    }
  }
  if (trajectory.empty()) return candidates;
  candidates.subdistricts =
      generate_subdistrict_candidates(trajectory, options_.explore_num, llm_);
  candidates.pois = generate_poi_candidates(trajectory, candidates.subdistricts,
                                            options_.explore_num, llm_);
  return candidates;
}

}  // namespace mobcast
