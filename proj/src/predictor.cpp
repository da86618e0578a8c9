#include "mobcast/predictor.hpp"

#include <algorithm>
#include <set>
#include <vector>

#include <fmt/format.h>

namespace mobcast {
namespace {

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string place_literal(std::string_view id) {
  if (all_digits(id)) return std::string{id};
  std::string quoted = "'";
  for (const char c : id) {
    if (c == '\'' || c == '\\') quoted += '\\';
    quoted += c;
  }
  return quoted + "'";
}

std::string strip_trailing_newlines(std::string text) {
  while (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

void replace_once(std::string& text, std::string_view placeholder,
                  std::string_view value) {
  const auto at = text.find(placeholder);
  text.replace(at, placeholder.size(), value);
}

constexpr std::string_view kTargetSlot = "{target_time, <next_place_id>}";

std::string fill_history(std::string text, const TestInstance& instance) {
  // Context and target first so that history text cannot shift their slots.
  replace_once(text, "{context_stays}", format_stay_list(instance.context));
  replace_once(text, kTargetSlot, format_target(instance.target));
  replace_once(text, "{historical_stays}", format_stay_list(instance.historical));
  return text;
}

constexpr std::string_view kLlmZsTemplate =
    "Your task is to predict <next_place_id> in <target_stay>, a location with "
    "an unknown ID, while temporal data is available.\n"
    "\n"
    "Predict <next_place_id> by considering:\n"
    "1. The user's activity trends gleaned from <historical_stays> and the "
    "current activities from  <context_stays>.\n"
    "2. Temporal details (start_time and day_of_week) of the target stay, "
    "crucial for understanding activity variations.\n"
    "\n"
    "Present your answer in a JSON object with:\n"
    "\"prediction\" (IDs of the five most probable places, ranked by "
    "probability) and \"reason\" (a concise justification for your "
    "prediction).\n"
    "    \n"
    "The data:\n"
    "<historical_stays>: {historical_stays}\n"
    "<context_stays>: {context_stays}\n"
    "<target_stay>: {target_time, <next_place_id>}";

constexpr std::string_view kLlmMobTemplate =
    "Your task is to predict a user's next location based on his/her activity "
    "pattern.\n"
    "You will be provided with <history> which is a list containing this "
    "user's historical stays, then <context> which provide contextual "
    "information \n"
    "about where and when this user has been to recently. Stays in both "
    "<history> and <context> are in chronological order.\n"
    "Each stay takes on such form as (start_time, day_of_week, duration, "
    "place_id). The detailed explanation of each element is as follows:\n"
    "start_time: the start time of the stay in 12h clock format.\n"
    "day_of_week: indicating the day of the week.\n"
    "duration: an integer indicating the duration (in minute) of each stay. "
    "Note that this will be None in the <target_stay> introduced later.\n"
    "place_id: an integer representing the unique place ID, which indicates "
    "where the stay is.\n"
    "\n"
    "Then you need to do next location prediction on <target_stay> which is "
    "the prediction target with unknown place ID denoted as <next_place_id> "
    "and \n"
    "unknown duration denoted as None, while temporal information is "
    "provided.      \n"
    "\n"
    "Please infer what the <next_place_id> might be (please output the 10 most "
    "likely places which are ranked in descending order in terms of "
    "probability), considering the following aspects:\n"
    "1. the activity pattern of this user that you learned from <history>, "
    "e.g., repeated visits to certain places during certain times;\n"
    "2. the context stays in <context>, which provide more recent activities "
    "of this user; \n"
    "3. the temporal information (i.e., start_time and day_of_week) of target "
    "stay, which is important because people's activity varies during "
    "different time (e.g., nighttime versus daytime)\n"
    "and on different days (e.g., weekday versus weekend).\n"
    "\n"
    "Please organize your answer in a JSON object containing following keys:\n"
    "\"prediction\" (the ID of the five most probable places in descending "
    "order of probability) and \"reason\" (a concise explanation that supports "
    "your prediction). Do not include line breaks in your output.\n"
    "\n"
    "The data are as follows:\n"
    "<historical>: {historical_stays}\n"
    "<context>: {context_stays}\n"
    "<target_stay>: {target_time, <next_place_id>}";

constexpr std::string_view kAgentMoveTask =
    "## Task\n"
    "Your task is to predict <next_place_id> in <target_stay>, a location with "
    "an unknown ID, while temporal data is available.\n"
    "\n"
    "## Predict <next_place_id> by considering:\n";

constexpr std::string_view kItemActivity =
    "The user's activity trends gleaned from <historical_stays> and the "
    "current activities from  <context_stays>.";
constexpr std::string_view kItemTemporal =
    "Temporal details (start_time and day_of_week) of the target stay, crucial "
    "for understanding activity variations.";
constexpr std::string_view kItemWorld =
    "The potential places that users may visit based on an overall analysis "
    "of multi-level urban spaces.";
constexpr std::string_view kItemMemory =
    "The personal profile and memory info extracted from the long trajectory "
    "history of each user.";

constexpr std::string_view kAgentMoveTail =
    "## The history data:\n"
    "<historical_stays>: {historical_stays}\n"
    "<context_stays>: {context_stays}\n"
    "<target_stay>: {target_time, <next_place_id>}\n"
    "\n"
    "## Output \n"
    "Present your answer in a JSON object with:\n"
    "\"prediction\" (list of IDs of the five most probable places, ranked by "
    "probability) and \"reason\" (a concise justification for your "
    "prediction).";

std::string frequency_ranking_reason(std::string_view last, bool from_transitions) {
  return from_transitions
             ? fmt::format("most frequent transitions out of {}", last)
             : std::string{"most frequently visited places"};
}

}  // namespace

std::optional<Method> parse_method(std::string_view tag) {
  if (tag == "agentmove") return Method::kAgentMove;
  if (tag == "llm-zs") return Method::kLlmZs;
  if (tag == "llm-mob") return Method::kLlmMob;
  if (tag == "markov") return Method::kMarkov;
  return std::nullopt;
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kAgentMove: return "agentmove";
    case Method::kLlmZs: return "llm-zs";
    case Method::kLlmMob: return "llm-mob";
    case Method::kMarkov: return "markov";
  }
  return "?";
}

std::string AblationConfig::tag() const {
  std::vector<std::string_view> parts;
  if (use_memory) parts.push_back("mem");
  if (use_world) parts.push_back("world");
  if (use_collective) parts.push_back("col");
  if (parts.empty()) return "base";
  return fmt::format("{}", fmt::join(parts, ","));
}

std::optional<AblationConfig> parse_ablation(std::string_view tag) {
  if (tag == "base" || tag == "none") return AblationConfig::base();
  if (tag == "all") return AblationConfig{};
  AblationConfig config = AblationConfig::base();
  std::size_t start = 0;
  while (start <= tag.size()) {
    auto comma = tag.find(',', start);
    if (comma == std::string_view::npos) comma = tag.size();
    const auto part = tag.substr(start, comma - start);
    if (part == "mem") {
      config.use_memory = true;
    } else if (part == "world") {
      config.use_world = true;
    } else if (part == "col") {
      config.use_collective = true;
    } else {
      return std::nullopt;
    }
    start = comma + 1;
  }
  return config;
}

std::string format_stay(const Stay& stay) {
  return fmt::format("('{}', '{}', {}, {})", stay.start_time(), stay.day_of_week(),
                     stay.duration_minutes ? std::to_string(*stay.duration_minutes)
                                           : std::string{"None"},
                     place_literal(stay.poi_id));
}

std::string format_target(const Stay& target) {
  return fmt::format("('{}', '{}', None, <next_place_id>)", target.start_time(),
                     target.day_of_week());
}

std::string format_stay_list(std::span<const Stay> stays) {
  if (stays.empty()) return "[]";
  std::string out = "[\n";
  for (std::size_t i = 0; i < stays.size(); ++i) {
    if (i) out += ",\n";
    out += format_stay(stays[i]);
  }
  return out + "\n]";
}

std::string llm_zs_prompt(const TestInstance& instance) {
  return fill_history(std::string{kLlmZsTemplate}, instance);
}

std::string llm_mob_prompt(const TestInstance& instance) {
  return fill_history(std::string{kLlmMobTemplate}, instance);
}

std::string agentmove_prompt(const TestInstance& instance,
                             const AgentMoveSections& sections) {
  if (!sections.world && !sections.social && !sections.memory) {
    return llm_zs_prompt(instance);
  }
  std::vector<std::string_view> items{kItemActivity, kItemTemporal};
  if (sections.world) items.push_back(kItemWorld);
  if (sections.memory) items.push_back(kItemMemory);

  std::string prompt{kAgentMoveTask};
  for (std::size_t i = 0; i < items.size(); ++i) {
    prompt += fmt::format("{}. {}\n", i + 1, items[i]);
  }
  prompt += '\n';
  if (sections.world) {
    prompt += "## The potential places from the global spatial view:\n";
    prompt += strip_trailing_newlines(*sections.world) + "\n\n";
  }
  if (sections.social) {
    prompt += "## The nearby places visited by other users with similar "
              "mobility pattern:\n";
    prompt += strip_trailing_newlines(*sections.social) + "\n\n";
  }
  if (sections.memory) {
    prompt += "## The personal profile and long memory:\n";
    prompt += strip_trailing_newlines(*sections.memory) + "\n\n";
  }
  prompt += kAgentMoveTail;
  // Fill only the tail so module text can never be mistaken for a slot.
  const std::size_t tail_at = prompt.size() - kAgentMoveTail.size();
  return prompt.substr(0, tail_at) +
         fill_history(prompt.substr(tail_at), instance);
}

std::string assemble_agentmove_prompt(const TestInstance& instance,
                                      const AgentMoveContext& context,
                                      const AblationConfig& ablation,
                                      const PredictorOptions& options) {
  static const PoiCatalog kEmpty;
  const PoiCatalog& catalog = context.catalog ? *context.catalog : kEmpty;
  AgentMoveSections sections;
  if (ablation.use_world) {
    CandidatePlaces candidates;
    if (context.world) candidates = context.world->candidates_for(instance, catalog);
    sections.world = render_world_prompt(candidates);
  }
  if (ablation.use_collective) {
    std::vector<Neighbor> neighbors;
    if (context.graph) {
      const auto anchors = recent_anchors(instance.context, options.neighbor_anchors);
      std::set<std::string> exclude;
      for (const auto& stay : instance.context) exclude.insert(stay.poi_id);
      neighbors = context.graph->neighbors_ranked(anchors, exclude,
                                                  options.neighbor_limit,
                                                  options.social_score);
    }
    sections.social = render_social_prompt(neighbors);
  }
  if (ablation.use_memory) {
    MemoryEntry entry = build_memory(instance, catalog, options.memory);
    sections.memory = render_memory_prompt(entry.long_term, entry.short_term,
                                           entry.profile,
                                           options.memory.prompt_budget_chars);
    if (context.pool) context.pool->put(instance.user_id, std::move(entry));
  }
  return agentmove_prompt(instance, sections);
}

Prediction predict_with_prompt(const std::string& prompt, ChatProvider& llm) {
  Prediction prediction;
  prediction.prompt_chars =
      fit_prompt_to_budget(prompt, llm.max_input_chars()).size();
  prediction.raw_output = llm.complete(prompt);
  if (auto parsed = parse_prediction_json(prediction.raw_output)) {
    prediction.result = std::move(*parsed);
  } else {
    prediction.parse_failed = true;
  }
  return prediction;
}

Prediction predict_agentmove(const TestInstance& instance,
                             const AgentMoveContext& context, ChatProvider& llm,
                             const AblationConfig& ablation,
                             const PredictorOptions& options) {
  return predict_with_prompt(
      assemble_agentmove_prompt(instance, context, ablation, options), llm);
}

Prediction predict_llm_zs(const TestInstance& instance, ChatProvider& llm) {
  return predict_with_prompt(llm_zs_prompt(instance), llm);
}

Prediction predict_llm_mob(const TestInstance& instance, ChatProvider& llm) {
  return predict_with_prompt(llm_mob_prompt(instance), llm);
}

MarkovModel MarkovModel::fit(std::span<const Session> train) {
  MarkovModel model;
  for (const auto& session : train) {
    for (std::size_t i = 0; i < session.stays.size(); ++i) {
      ++model.frequency_[session.stays[i].poi_id];
      if (i > 0) {
        ++model.transitions_[session.stays[i - 1].poi_id][session.stays[i].poi_id];
      }
    }
  }
  return model;
}

PredictionResult MarkovModel::predict(const TestInstance& instance) const {
  const auto global = [this](const std::string& id) -> std::size_t {
    const auto it = frequency_.find(id);
    return it == frequency_.end() ? 0 : it->second;
  };
  std::vector<std::string> ranked;
  std::set<std::string> taken;
  const auto take_ranked = [&](std::vector<std::pair<std::string, std::size_t>> list,
                               bool by_global) {
    std::sort(list.begin(), list.end(), [&](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      if (by_global) {
        const auto ga = global(a.first), gb = global(b.first);
        if (ga != gb) return ga > gb;
      }
      return a.first < b.first;
    });
    for (const auto& [id, _] : list) {
      if (ranked.size() == kPredictionSize) return;
      if (taken.insert(id).second) ranked.push_back(id);
    }
  };

  std::string last;
  if (!instance.context.empty()) {
    last = instance.context.back().poi_id;
  } else if (!instance.historical.empty()) {
    last = instance.historical.back().poi_id;
  }
  bool used_transitions = false;
  if (const auto row = transitions_.find(last); row != transitions_.end()) {
    take_ranked({row->second.begin(), row->second.end()}, true);
    used_transitions = !ranked.empty();
  }
  take_ranked({frequency_.begin(), frequency_.end()}, false);

  std::map<std::string, std::size_t> own;
  for (const auto& stay : instance.historical) ++own[stay.poi_id];
  for (const auto& stay : instance.context) ++own[stay.poi_id];
  take_ranked({own.begin(), own.end()}, false);

  return {std::move(ranked), frequency_ranking_reason(last, used_transitions)};
}

Prediction predict_markov(const TestInstance& instance, const MarkovModel& model) {
  Prediction prediction;
  prediction.result = model.predict(instance);
  prediction.parse_failed = prediction.result.prediction.empty();
  return prediction;
}

}  // namespace mobcast
