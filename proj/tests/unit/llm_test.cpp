#include <gtest/gtest.h>

#include <fmt/format.h>

#include "fake_http.hpp"
#include "mobcast/llm.hpp"

namespace mobcast {
namespace {

using testing::FakeHttpClient;
using testing::ok;
using testing::status;
using testing::transport_failure;

std::string completion(std::string_view content) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
  return j.dump();
}

struct RecordingSleeper {
  std::shared_ptr<std::vector<std::chrono::milliseconds>> waits =
      std::make_shared<std::vector<std::chrono::milliseconds>>();
  Sleeper fn() {
    return [w = waits](std::chrono::milliseconds d) { w->push_back(d); };
  }
};

ProviderConfig test_config() {
  ProviderConfig c;
  c.base_url = "http://localhost:1/v1/";
  c.api_key = "k";
  c.initial_backoff = std::chrono::milliseconds{100};
  return c;
}

TEST(OpenAi, RequestShape) {
  auto http = std::make_shared<FakeHttpClient>(std::vector{ok(completion("hi"))});
  OpenAiChatProvider p(test_config(), http, [](auto) {});
  EXPECT_EQ(p.complete("hello"), "hi");
  const auto reqs = http->requests();
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].url, "http://localhost:1/v1/chat/completions");
  const auto body = nlohmann::json::parse(reqs[0].body);
  EXPECT_EQ(body["model"], "gpt-4o-mini");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "hello");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["max_tokens"], 1000);
  EXPECT_EQ(reqs[0].headers.find("Authorization")->second, "Bearer k");
}

TEST(OpenAi, TwoServerErrorsThenSuccess) {
  auto http = std::make_shared<FakeHttpClient>(
      std::vector{status(500), status(500), ok(completion("done"))});
  RecordingSleeper sleeper;
  OpenAiChatProvider p(test_config(), http, sleeper.fn());
  EXPECT_EQ(p.complete("x"), "done");
  EXPECT_EQ(p.attempts_made(), 3);
  EXPECT_EQ(*sleeper.waits, (std::vector<std::chrono::milliseconds>{
                                std::chrono::milliseconds{100}, std::chrono::milliseconds{200}}));
}

TEST(OpenAi, ExhaustedRetriesAreUnavailable) {
  auto http = std::make_shared<FakeHttpClient>(std::vector{transport_failure(), status(429)});
  OpenAiChatProvider p(test_config(), http, [](auto) {});
  EXPECT_THROW(p.complete("x"), ProviderUnavailable);
  EXPECT_EQ(http->requests().size(), 3u);
}

TEST(OpenAi, UnauthorizedIsNotRetried) {
  auto http = std::make_shared<FakeHttpClient>(std::vector{status(401)});
  OpenAiChatProvider p(test_config(), http, [](auto) {});
  EXPECT_THROW(p.complete("x"), AuthError);
  EXPECT_EQ(http->requests().size(), 1u);
}

TEST(OpenAi, ClientErrorIsNotRetried) {
  auto http = std::make_shared<FakeHttpClient>(std::vector{status(400)});
  OpenAiChatProvider p(test_config(), http, [](auto) {});
  try {
    p.complete("x");
    FAIL();
  } catch (const ProviderUnavailable&) {
    FAIL() << "400 must not be treated as retryable";
  } catch (const ProviderError&) {
  }
  EXPECT_EQ(http->requests().size(), 1u);
}

TEST(Config, Validation) {
  ProviderConfig c;
  c.temperature = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.max_input_tokens = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

std::string prompt_with_history(std::size_t lines, std::size_t width) {
  std::string p = "## Task\nheader text\n<historical_stays>: [\n";
  for (std::size_t i = 0; i < lines; ++i) {
    std::string item = fmt::format("('{:04}', 'Monday', 60, 'X')", i);
    item.resize(width - 1, ' ');
    p += item + (i + 1 < lines ? ",\n" : "\n");
  }
  p += "]\n<context_stays>: []\n## Output \nPresent your answer";
  return p;
}

TEST(Budget, TwelveThousandCharsFitInEightThousand) {
  const std::string prompt = prompt_with_history(300, 40);
  ASSERT_GE(prompt.size(), 12000u);
  const std::string fitted = fit_prompt_to_budget(prompt, 2000 * kCharsPerToken);
  EXPECT_LE(fitted.size(), 8000u);
  // Only whole history lines were removed, oldest first.
  EXPECT_TRUE(fitted.starts_with("## Task\nheader text\n<historical_stays>: [\n"));
  EXPECT_TRUE(fitted.ends_with("]\n<context_stays>: []\n## Output \nPresent your answer"));
  EXPECT_EQ(fitted.find("'0000'"), std::string::npos);
  EXPECT_NE(fitted.find("'0299'"), std::string::npos);
  EXPECT_NE(prompt.find(fitted.substr(fitted.find("[\n") + 2)), std::string::npos);
}

TEST(Budget, CollapsesEmptiedBlock) {
  const std::string prompt = prompt_with_history(3, 40);
  const std::string fitted = fit_prompt_to_budget(prompt, 10);
  EXPECT_NE(fitted.find("<historical_stays>: []\n<context_stays>"), std::string::npos);
  EXPECT_EQ(fit_prompt_to_budget(prompt, 100000), prompt);
}

TEST(MockProvider, Policies) {
  auto echo = MockProvider::echo_fixed("x");
  EXPECT_EQ(echo->complete("anything"), "x");
  auto canned = MockProvider::canned_sequence({"a", "b"});
  EXPECT_EQ(canned->complete("p"), "a");
  EXPECT_EQ(canned->complete("p"), "b");
  EXPECT_THROW(canned->complete("p"), ProviderError);
  EXPECT_THROW(echo->complete(""), std::invalid_argument);
  EXPECT_EQ(echo->calls(), 1u);
}

TEST(MockProvider, FrequencyOracle) {
  const std::string prompt =
      "### long term memory info\n"
      "The most frequently visited venues are C (1 times), A (3 times), E (1 times), "
      "B (2 times), D (1 times), F (1 times).\n";
  const auto parsed = parse_prediction_json(frequency_oracle_reply(prompt));
  ASSERT_TRUE(parsed);
  EXPECT_EQ(parsed->prediction, (std::vector<std::string>{"A", "B", "C", "D", "E"}));
  EXPECT_FALSE(parse_prediction_json(frequency_oracle_reply("no memory here")));
}

TEST(MakeProvider, Tags) {
  ProviderConfig c;
  EXPECT_EQ(make_provider("mock:echo=hi", c)->complete("p"), "hi");
  EXPECT_EQ(make_provider("mock:frequency-oracle", c)->name(), "mock:frequency-oracle");
  EXPECT_THROW(make_provider("bogus", c), std::invalid_argument);
}

TEST(JsonSpans, StringAware) {
  const auto spans = balanced_json_spans(R"(x {"a":"}{"} y {"b":{"c":1}} {unclosed)");
  ASSERT_GE(spans.size(), 3u);
  EXPECT_EQ(spans[0], R"({"a":"}{"})");
  EXPECT_EQ(spans[1], R"({"b":{"c":1}})");
  EXPECT_EQ(spans[2], R"({"c":1})");
}

TEST(ParsePrediction, DirectParse) {
  const auto r = parse_prediction_json(R"({"prediction":["a","b","c","d","e"],"reason":"r"})");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->prediction, (std::vector<std::string>{"a", "b", "c", "d", "e"}));
  EXPECT_EQ(r->reason, "r");
}

TEST(ParsePrediction, ProseWrappedIntegers) {
  const auto r = parse_prediction_json(R"(Sure! {"prediction":[1,2,3,4,5]})");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->prediction, (std::vector<std::string>{"1", "2", "3", "4", "5"}));
  EXPECT_EQ(r->reason, "");
}

TEST(ParsePrediction, NoJson) { EXPECT_FALSE(parse_prediction_json("no json here")); }

TEST(ParsePrediction, DedupeThenTrim) {
  const auto r = parse_prediction_json(R"({"prediction":["a","a","b","c","d","e","f"]})");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->prediction, (std::vector<std::string>{"a", "b", "c", "d", "e"}));
}

TEST(ParsePrediction, SkipsObjectsWithoutKey) {
  const auto r = parse_prediction_json(R"({"note":1} then {"prediction":["z"]})");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->prediction, std::vector<std::string>{"z"});
  EXPECT_FALSE(parse_prediction_json(R"({"prediction":[]})"));
  EXPECT_FALSE(parse_prediction_json(R"({"prediction":["a","b")"));
}

}  // namespace
}  // namespace mobcast
