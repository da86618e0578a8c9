#include <gtest/gtest.h>

#include "mobcast/config.hpp"
#include "test_support.hpp"

namespace mobcast {
namespace {

TEST(Config, Defaults) {
  const RunConfig c;
  EXPECT_EQ(c.provider.temperature, 0.0);
  EXPECT_EQ(c.provider.max_output_tokens, 1000);
  EXPECT_EQ(c.provider.max_input_tokens, 2000);
  EXPECT_EQ(c.neighbor_limit, 10u);
  EXPECT_EQ(c.failure_budget, 0.05);
}

TEST(Config, ParsesKnownKeys) {
  const auto c = parse_config(
      "# comment\n"
      "model = qwen2-72b\n"
      "base_url=http://localhost:9/v1\n"
      "  temperature = 0.5  \n"
      "\n"
      "context_k = 3\n"
      "history_len = 30\n"
      "explore_num = 4\n"
      "neighbor_limit = 7\n"
      "social_score = uniform\n"
      "timezone = +09:00\n"
      "geocoder_url = http://127.0.0.1:1/reverse\n"
      "geocoder_cache = /tmp/g.jsonl\n"
      "graph_init_from_train = false\n"
      "failure_budget = 0.1\n");
  EXPECT_EQ(c.provider.model_name, "qwen2-72b");
  EXPECT_EQ(c.provider.base_url, "http://localhost:9/v1");
  EXPECT_EQ(c.provider.temperature, 0.5);
  EXPECT_EQ(c.context_k, 3u);
  EXPECT_EQ(c.history_len, 30u);
  EXPECT_EQ(c.explore_num, 4u);
  EXPECT_EQ(c.neighbor_limit, 7u);
  EXPECT_EQ(c.social_score, ScoreMode::kUniform);
  EXPECT_EQ(c.timezone, UtcOffset{9 * 60});
  EXPECT_EQ(c.geocoder.base_url, "http://127.0.0.1:1/reverse");
  EXPECT_FALSE(c.graph_init_from_train);
  EXPECT_EQ(c.failure_budget, 0.1);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("bogus = 1\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("context_k = 0\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("temperature = -1\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("social_score = loud\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("no equals sign\n"), std::invalid_argument);
  try {
    parse_config("model = m\nretries = many\n");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string{e.what()}.find("config line 2"), std::string::npos);
  }
}

TEST(Config, LoadFromFileKeepsBase) {
  testing::TempDir dir;
  testing::write_file(dir / "run.conf", "explore_num = 2\n");
  RunConfig base;
  base.context_k = 9;
  const auto c = load_config(dir / "run.conf", base);
  EXPECT_EQ(c.explore_num, 2u);
  EXPECT_EQ(c.context_k, 9u);
}

}  // namespace
}  // namespace mobcast
