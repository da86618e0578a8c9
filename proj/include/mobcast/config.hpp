#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "mobcast/graph.hpp"
#include "mobcast/llm.hpp"
#include "mobcast/world.hpp"

namespace mobcast {

struct RunConfig {
  ProviderConfig provider;
  std::size_t context_k = 5;
  std::size_t history_len = 15;
  std::size_t explore_num = 5;
  std::size_t neighbor_limit = 10;
  std::size_t neighbor_anchors = 3;
  ScoreMode social_score = ScoreMode::kWeight;
  std::optional<UtcOffset> timezone;
  std::size_t memory_top_k = 5;
  std::size_t memory_budget = 3000;
  bool per_session_transitions = false;
  bool graph_init_from_train = true;
  GeocoderConfig geocoder;
  // Fraction of instances allowed to end in ProviderUnavailable.
  double failure_budget = 0.05;
};

// `key = value` lines; `#` starts a comment. Unknown keys and bad values
// throw std::invalid_argument naming the line.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace mobcast
