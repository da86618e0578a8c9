#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mobcast/predictor.hpp"
#include "test_support.hpp"
#include "toy_fixture.hpp"

namespace mobcast {
namespace {

using testing::read_golden;
using testing::toy_catalog;
using testing::toy_graph;
using testing::toy_instance;
using testing::toy_world_llm;

std::size_t occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = text.find(needle); at != std::string::npos;
       at = text.find(needle, at + needle.size())) {
    ++n;
  }
  return n;
}

TEST(Format, StayTuples) {
  const auto s = testing::stay_at("A", "2012-04-02T00:00:00Z", 60, std::chrono::hours{9});
  EXPECT_EQ(format_stay(s), "('09:00 AM', 'Monday', 60, 'A')");
  auto numeric = s;
  numeric.poi_id = "1042";
  numeric.duration_minutes.reset();
  EXPECT_EQ(format_stay(numeric), "('09:00 AM', 'Monday', None, 1042)");
  EXPECT_EQ(format_target(s), "('09:00 AM', 'Monday', None, <next_place_id>)");
  EXPECT_EQ(format_stay_list({}), "[]");
  const std::vector<Stay> two{s, numeric};
  EXPECT_EQ(format_stay_list(two),
            "[\n('09:00 AM', 'Monday', 60, 'A'),\n('09:00 AM', 'Monday', None, 1042)\n]");
}

TEST(Ablation, TagsAndParsing) {
  EXPECT_EQ(AblationConfig{}.tag(), "mem,world,col");
  EXPECT_EQ(AblationConfig::base().tag(), "base");
  EXPECT_EQ(parse_ablation("world,mem"), (AblationConfig{true, true, false}));
  EXPECT_EQ(parse_ablation("none"), AblationConfig::base());
  EXPECT_FALSE(parse_ablation("mem,bogus"));
  EXPECT_EQ(parse_method("llm-mob"), Method::kLlmMob);
  EXPECT_FALSE(parse_method("fpmc"));
}

TEST(Golden, BaselinePrompts) {
  EXPECT_EQ(llm_zs_prompt(toy_instance()), read_golden("toy_llm_zs.txt"));
  EXPECT_EQ(llm_mob_prompt(toy_instance()), read_golden("toy_llm_mob.txt"));
}

TEST(Golden, ModuleSections) {
  const auto in = toy_instance();
  const auto entry = build_memory(in, toy_catalog());
  EXPECT_EQ(render_memory_prompt(entry.long_term, entry.short_term, entry.profile),
            read_golden("toy_memory.txt"));

  const auto graph = toy_graph();
  const auto anchors = recent_anchors(in.context, 3);
  const auto neighbors = graph.neighbors_ranked(anchors, {"A", "B", "E"}, 10);
  EXPECT_EQ(render_social_prompt(neighbors), read_golden("toy_collective.txt"));

  auto llm = toy_world_llm();
  WorldKnowledge world(nullptr, *llm);
  EXPECT_EQ(render_world_prompt(world.candidates_for(in, toy_catalog())),
            read_golden("toy_world.txt"));
  const auto sent = llm->sent_prompts();
  ASSERT_EQ(sent.size(), 5u);
  EXPECT_EQ(sent[3], read_golden("toy_world_block_prompt.txt"));
  EXPECT_EQ(sent[4], read_golden("toy_world_poi_prompt.txt"));
}

TEST(Golden, FullAgentMove) {
  const auto catalog = toy_catalog();
  const auto graph = toy_graph();
  auto llm = toy_world_llm();
  WorldKnowledge world(nullptr, *llm);
  MemoryPool pool;
  const AgentMoveContext context{&catalog, &pool, &graph, &world};
  EXPECT_EQ(assemble_agentmove_prompt(toy_instance(), context, AblationConfig{}),
            read_golden("toy_agentmove_full.txt"));
  EXPECT_TRUE(pool.contains("u01"));
}

TEST(Ablation, BaseEqualsLlmZs) {
  const auto catalog = toy_catalog();
  const auto graph = toy_graph();
  MemoryPool pool;
  const AgentMoveContext context{&catalog, &pool, &graph, nullptr};
  const auto prompt =
      assemble_agentmove_prompt(toy_instance(), context, AblationConfig::base());
  EXPECT_EQ(prompt, read_golden("toy_llm_zs.txt"));
  for (const char* header : {"## The potential places", "## The nearby places",
                             "## The personal profile", "### long term memory"}) {
    EXPECT_EQ(prompt.find(header), std::string::npos) << header;
  }
  EXPECT_EQ(pool.size(), 0u);

  auto llm = MockProvider::echo_fixed(R"({"prediction":["C","A","B","D","E"],"reason":"r"})");
  const auto p = predict_agentmove(toy_instance(), context, *llm, AblationConfig::base());
  EXPECT_EQ(p.result.prediction, (std::vector<std::string>{"C", "A", "B", "D", "E"}));
  EXPECT_EQ(llm->sent_prompts().at(0), prompt);
}

TEST(Ablation, GatingKeepsOnlyEnabledSections) {
  const auto catalog = toy_catalog();
  const auto graph = toy_graph();
  const AgentMoveContext context{&catalog, nullptr, &graph, nullptr};
  const auto col = assemble_agentmove_prompt(toy_instance(), context,
                                             AblationConfig{false, false, true});
  EXPECT_NE(col.find("## The nearby places visited by other users with similar mobility "
                     "pattern:\n1-hop neighbor places in the social world: F, G\n\n"
                     "## The history data:"),
            std::string::npos);
  EXPECT_EQ(col.find("3. "), std::string::npos);
  EXPECT_EQ(col.find("## The personal profile"), std::string::npos);

  const auto mem = assemble_agentmove_prompt(toy_instance(), context,
                                             AblationConfig{true, false, false});
  EXPECT_NE(mem.find("3. The personal profile and memory info"), std::string::npos);
  EXPECT_EQ(mem.find("## The potential places"), std::string::npos);
  EXPECT_EQ(mem.find("## The nearby places"), std::string::npos);
}

TEST(PromptProperty, ContextAndTargetAppearOnce) {
  const auto catalog = toy_catalog();
  const auto graph = toy_graph();
  const auto in = toy_instance();
  const std::string context_block = format_stay_list(in.context);
  const std::string target = format_target(in.target);
  for (int mask = 0; mask < 8; ++mask) {
    const AblationConfig ablation{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
    auto llm = toy_world_llm();
    WorldKnowledge world(nullptr, *llm);
    const AgentMoveContext context{&catalog, nullptr, &graph, &world};
    const auto prompt = assemble_agentmove_prompt(in, context, ablation);
    EXPECT_EQ(occurrences(prompt, context_block), 1u) << ablation.tag();
    EXPECT_EQ(occurrences(prompt, target), 1u) << ablation.tag();
  }
  EXPECT_EQ(occurrences(llm_mob_prompt(in), target), 1u);
}

TEST(PromptProperty, TargetIdNeverLeaks) {
  auto in = toy_instance();
  in.target_poi = "ZZ_SENTINEL_42";
  in.target.poi_id = "ZZ_SENTINEL_42";
  auto catalog = toy_catalog();
  catalog["ZZ_SENTINEL_42"] = Poi{"ZZ_SENTINEL_42", "Museum", std::nullopt, "Hidden"};
  // The graph knows the target, but only as a neighbor of a non-anchor.
  TransitionGraph graph = toy_graph();
  graph.update_with_trajectory(testing::session_of({"H", "ZZ_SENTINEL_42"}), &catalog);
  auto llm = toy_world_llm();
  WorldKnowledge world(nullptr, *llm);
  const AgentMoveContext context{&catalog, nullptr, &graph, &world};
  for (const auto& prompt : {assemble_agentmove_prompt(in, context, AblationConfig{}),
                             llm_zs_prompt(in), llm_mob_prompt(in)}) {
    EXPECT_EQ(prompt.find("ZZ_SENTINEL_42"), std::string::npos);
  }
  for (const auto& sent : llm->sent_prompts()) {
    EXPECT_EQ(sent.find("ZZ_SENTINEL_42"), std::string::npos);
  }
}

TEST(Predict, FrequencyOracleWithMemory) {
  const auto catalog = toy_catalog();
  const AgentMoveContext context{&catalog, nullptr, nullptr, nullptr};
  auto llm = MockProvider::frequency_oracle();
  const auto p = predict_agentmove(toy_instance(), context, *llm,
                                   AblationConfig{true, false, false});
  // History counts A:3 B:2 C:1 D:1.
  EXPECT_EQ(p.result.prediction, (std::vector<std::string>{"A", "B", "C", "D"}));
  EXPECT_FALSE(p.parse_failed);
}

TEST(Predict, BaselinesParseAndMiss) {
  auto ten = MockProvider::echo_fixed(
      R"({"prediction":[1,2,3,4,5,6,7,8,9,10],"reason":"ten"})");
  EXPECT_EQ(predict_llm_mob(toy_instance(), *ten).result.prediction,
            (std::vector<std::string>{"1", "2", "3", "4", "5"}));
  auto verbose = MockProvider::echo_fixed(
      "Based on the history, the user will likely go to place A, then maybe B.");
  const auto miss = predict_llm_mob(toy_instance(), *verbose);
  EXPECT_TRUE(miss.parse_failed);
  EXPECT_TRUE(miss.result.prediction.empty());
  EXPECT_EQ(miss.raw_output.substr(0, 9), "Based on ");
  auto zs = MockProvider::echo_fixed(R"({"prediction":["A"],"reason":"x"})");
  const auto ok = predict_llm_zs(toy_instance(), *zs);
  EXPECT_EQ(ok.result.prediction, std::vector<std::string>{"A"});
  EXPECT_EQ(ok.prompt_chars, llm_zs_prompt(toy_instance()).size());
}

TestInstance markov_instance(std::vector<std::string> history, std::string last) {
  TestInstance in;
  for (const auto& id : history)
    in.historical.push_back(testing::stay_at(id, "2012-04-02T00:00:00Z"));
  in.context.push_back(testing::stay_at(std::move(last), "2012-04-03T00:00:00Z"));
  return in;
}

TEST(Markov, RanksTransitionsThenFrequency) {
  // A->B x3, A->C x1; D is globally the most frequent.
  std::vector<Session> train{testing::session_of({"A", "B", "A", "B", "A", "B", "A", "C"}),
                             testing::session_of({"D", "D", "D", "D", "D", "D", "D", "D", "D"})};
  const auto model = MarkovModel::fit(train);
  EXPECT_EQ(model.transitions().at("A").at("B"), 3u);
  const auto r = model.predict(markov_instance({}, "A"));
  EXPECT_EQ(r.prediction, (std::vector<std::string>{"B", "C", "D", "A"}));
  EXPECT_EQ(r.reason, "most frequent transitions out of A");

  const auto unseen = model.predict(markov_instance({}, "Q"));
  EXPECT_EQ(unseen.prediction, (std::vector<std::string>{"D", "A", "B", "C", "Q"}));
  EXPECT_EQ(unseen.reason, "most frequently visited places");
}

TEST(Markov, ColdStartUsesOwnHistory) {
  const auto model = MarkovModel::fit({});
  const auto r = model.predict(markov_instance({"X", "Y", "X", "Z", "X", "Y", "W", "V"}, "Y"));
  // Own counts: X3 Y3 (incl. context) Z1 W1 V1 -> ties by id.
  EXPECT_EQ(r.prediction, (std::vector<std::string>{"X", "Y", "V", "W", "Z"}));
  EXPECT_FALSE(predict_markov(markov_instance({}, "Y"), model).parse_failed);
  TestInstance empty;
  EXPECT_TRUE(predict_markov(empty, model).parse_failed);
}

TEST(MarkovProperty, MatchesBruteForceAndIgnoresSessionOrder) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> loc(0, 7), len(2, 8), count(1, 12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Session> train(static_cast<std::size_t>(count(rng)));
    for (auto& s : train) {
      std::vector<std::string> ids(static_cast<std::size_t>(len(rng)));
      for (auto& id : ids) id = std::string(1, static_cast<char>('a' + loc(rng)));
      s = testing::session_of(ids);
    }
    const std::string last(1, static_cast<char>('a' + loc(rng)));
    const auto in = markov_instance({}, last);
    const auto r = MarkovModel::fit(train).predict(in);

    std::map<std::string, std::size_t> freq;
    std::map<std::string, std::size_t> out;
    for (const auto& s : train) {
      for (std::size_t i = 0; i < s.stays.size(); ++i) {
        ++freq[s.stays[i].poi_id];
        if (i && s.stays[i - 1].poi_id == last) ++out[s.stays[i].poi_id];
      }
    }
    std::vector<std::string> expected;
    std::vector<std::string> succ;
    for (const auto& [id, _] : out) succ.push_back(id);
    std::sort(succ.begin(), succ.end(), [&](const auto& a, const auto& b) {
      return std::tuple(-static_cast<long>(out[a]), -static_cast<long>(freq[a]), a) <
             std::tuple(-static_cast<long>(out[b]), -static_cast<long>(freq[b]), b);
    });
    std::vector<std::string> pop;
    for (const auto& [id, _] : freq) pop.push_back(id);
    std::stable_sort(pop.begin(), pop.end(),
                     [&](const auto& a, const auto& b) { return freq[a] > freq[b]; });
    for (const auto& list : {succ, pop, std::vector<std::string>{last}}) {
      for (const auto& id : list) {
        if (expected.size() < 5 &&
            std::find(expected.begin(), expected.end(), id) == expected.end()) {
          expected.push_back(id);
        }
      }
    }
    ASSERT_EQ(r.prediction, expected);
    std::shuffle(train.begin(), train.end(), rng);
    ASSERT_EQ(MarkovModel::fit(train).predict(in).prediction, expected);
  }
}

}  // namespace
}  // namespace mobcast
