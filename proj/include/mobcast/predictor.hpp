#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "mobcast/graph.hpp"
#include "mobcast/llm.hpp"
#include "mobcast/memory.hpp"
#include "mobcast/trajectory.hpp"
#include "mobcast/world.hpp"

namespace mobcast {

enum class Method { kAgentMove, kLlmZs, kLlmMob, kMarkov };

std::optional<Method> parse_method(std::string_view tag);
std::string_view to_string(Method method);

struct AblationConfig {
  bool use_memory = true;
  bool use_world = true;
  bool use_collective = true;

  static AblationConfig base() { return {false, false, false}; }
  bool any() const { return use_memory || use_world || use_collective; }
  // "base" when all off, otherwise the enabled parts as "mem,world,col".
  std::string tag() const;
  bool operator==(const AblationConfig&) const = default;
};

// Accepts "base", "none", "all", or a comma list of mem/world/col.
std::optional<AblationConfig> parse_ablation(std::string_view tag);

// ---------------------------------------------------------------------------
// Stay rendering

// ('09:00 AM', 'Monday', 60, 'A'); all-digit ids stay unquoted.
std::string format_stay(const Stay& stay);
// ('09:00 PM', 'Tuesday', None, <next_place_id>)
std::string format_target(const Stay& target);
// One tuple per line inside brackets, "[]" when empty.
std::string format_stay_list(std::span<const Stay> stays);

// ---------------------------------------------------------------------------
// Prompt assembly

std::string llm_zs_prompt(const TestInstance& instance);
std::string llm_mob_prompt(const TestInstance& instance);

// Pre-rendered module sections; an absent section is left out with its
// heading and consideration item. With none present the LLM-ZS prompt is
// returned.
struct AgentMoveSections {
  std::optional<std::string> world;
  std::optional<std::string> social;
  std::optional<std::string> memory;
};

std::string agentmove_prompt(const TestInstance& instance,
                             const AgentMoveSections& sections);

struct PredictorOptions {
  std::size_t neighbor_limit = 10;
  std::size_t neighbor_anchors = 3;
  ScoreMode social_score = ScoreMode::kWeight;
  MemoryOptions memory;
};

// Everything the AgentMove prompt may draw on. Only the parts the ablation
// enables are dereferenced.
struct AgentMoveContext {
  const PoiCatalog* catalog = nullptr;
  MemoryPool* pool = nullptr;
  const TransitionGraph* graph = nullptr;
  WorldKnowledge* world = nullptr;
};

std::string assemble_agentmove_prompt(const TestInstance& instance,
                                      const AgentMoveContext& context,
                                      const AblationConfig& ablation,
                                      const PredictorOptions& options = {});

// ---------------------------------------------------------------------------
// Prediction

struct Prediction {
  PredictionResult result;
  bool parse_failed = false;
  std::string raw_output;
  std::size_t prompt_chars = 0;  // as sent, after budget truncation
};

Prediction predict_with_prompt(const std::string& prompt, ChatProvider& llm);

Prediction predict_agentmove(const TestInstance& instance,
                             const AgentMoveContext& context, ChatProvider& llm,
                             const AblationConfig& ablation,
                             const PredictorOptions& options = {});
Prediction predict_llm_zs(const TestInstance& instance, ChatProvider& llm);
Prediction predict_llm_mob(const TestInstance& instance, ChatProvider& llm);

// First-order transition counts and visit frequencies from training sessions.
class MarkovModel {
 public:
  static MarkovModel fit(std::span<const Session> train);

  // Ranks successors of the last context stay by transition count, then
  // global frequency, then id; backfills from global frequency and then from
  // the instance's own stays.
  PredictionResult predict(const TestInstance& instance) const;

  const std::map<std::string, std::map<std::string, std::size_t>>& transitions()
      const {
    return transitions_;
  }
  const std::map<std::string, std::size_t>& frequency() const { return frequency_; }

 private:
  std::map<std::string, std::map<std::string, std::size_t>> transitions_;
  std::map<std::string, std::size_t> frequency_;
};

Prediction predict_markov(const TestInstance& instance, const MarkovModel& model);

}  // namespace mobcast
