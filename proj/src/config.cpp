#include "mobcast/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

#include "mobcast/dataset_io.hpp"

namespace mobcast {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t to_count(std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected a non-negative integer");
  }
  return out;
}

int to_int(std::string_view v) {
  const auto n = to_count(v);
  if (n > 1'000'000'000) throw std::invalid_argument("value too large");
  return static_cast<int>(n);
}

double to_real(std::string_view v) {
  std::size_t used = 0;
  const std::string s{v};
  const double d = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("expected a number");
  return d;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("expected true or false");
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table{
      {"base_url", [](RunConfig& c, std::string_view v) { c.provider.base_url = v; }},
      {"model", [](RunConfig& c, std::string_view v) { c.provider.model_name = v; }},
      {"temperature",
       [](RunConfig& c, std::string_view v) { c.provider.temperature = to_real(v); }},
      {"max_output_tokens",
       [](RunConfig& c, std::string_view v) { c.provider.max_output_tokens = to_int(v); }},
      {"max_input_tokens",
       [](RunConfig& c, std::string_view v) { c.provider.max_input_tokens = to_int(v); }},
      {"retries", [](RunConfig& c, std::string_view v) { c.provider.retries = to_int(v); }},
      {"timeout_ms",
       [](RunConfig& c, std::string_view v) {
         c.provider.timeout = std::chrono::milliseconds{to_count(v)};
       }},
      {"backoff_ms",
       [](RunConfig& c, std::string_view v) {
         c.provider.initial_backoff = std::chrono::milliseconds{to_count(v)};
       }},
      {"max_in_flight",
       [](RunConfig& c, std::string_view v) { c.provider.max_in_flight = to_int(v); }},
      {"context_k", [](RunConfig& c, std::string_view v) { c.context_k = to_count(v); }},
      {"history_len",
       [](RunConfig& c, std::string_view v) { c.history_len = to_count(v); }},
      {"explore_num",
       [](RunConfig& c, std::string_view v) { c.explore_num = to_count(v); }},
      {"neighbor_limit",
       [](RunConfig& c, std::string_view v) { c.neighbor_limit = to_count(v); }},
      {"neighbor_anchors",
       [](RunConfig& c, std::string_view v) { c.neighbor_anchors = to_count(v); }},
      {"social_score",
       [](RunConfig& c, std::string_view v) {
         const auto mode = parse_score_mode(v);
         if (!mode) throw std::invalid_argument("expected uniform or weight");
         c.social_score = *mode;
       }},
      {"timezone",
       [](RunConfig& c, std::string_view v) {
         const auto tz = parse_utc_offset(v);
         if (!tz) throw std::invalid_argument("expected a UTC offset");
         c.timezone = *tz;
       }},
      {"memory_top_k",
       [](RunConfig& c, std::string_view v) { c.memory_top_k = to_count(v); }},
      {"memory_budget",
       [](RunConfig& c, std::string_view v) { c.memory_budget = to_count(v); }},
      {"per_session_transitions",
       [](RunConfig& c, std::string_view v) { c.per_session_transitions = to_bool(v); }},
      {"graph_init_from_train",
       [](RunConfig& c, std::string_view v) { c.graph_init_from_train = to_bool(v); }},
      {"geocoder_url",
       [](RunConfig& c, std::string_view v) { c.geocoder.base_url = v; }},
      {"geocoder_email",
       [](RunConfig& c, std::string_view v) { c.geocoder.email = v; }},
      {"geocoder_cache",
       [](RunConfig& c, std::string_view v) { c.geocoder.cache_path = std::string{v}; }},
      {"failure_budget",
       [](RunConfig& c, std::string_view v) {
         c.failure_budget = to_real(v);
         if (!(c.failure_budget >= 0.0 && c.failure_budget <= 1.0)) {
           throw std::invalid_argument("expected a fraction in [0, 1]");
         }
       }},
  };
  return table;
}

}  // namespace

RunConfig parse_config(std::string_view text, RunConfig config) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(fmt::format("config line {}: expected key = value",
                                              line_no));
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw std::invalid_argument(
          fmt::format("config line {}: unknown key '{}'", line_no, key));
    }
    try {
      it->second(config, value);
    } catch (const std::exception& e) {
      throw std::invalid_argument(fmt::format("config line {}: {}: {}", line_no, key,
                                              e.what()));
    }
  }
  config.provider.validate();
  if (config.explore_num == 0 || config.neighbor_limit == 0 ||
      config.neighbor_anchors == 0 || config.context_k == 0) {
    throw std::invalid_argument(
        "context_k, explore_num, neighbor_limit and neighbor_anchors must be >= 1");
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  return parse_config(read_text(path), std::move(base));
}

}  // namespace mobcast
