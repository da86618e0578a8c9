#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mobcast/http.hpp"

namespace mobcast {

class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Retries exhausted on transport errors, 429 or 5xx.
class ProviderUnavailable : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class AuthError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

struct ProviderConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-4o-mini";
  std::string api_key;
  double temperature = 0.0;
  int max_output_tokens = 1000;
  int max_input_tokens = 2000;
  // Total attempts per request, the first one included.
  int retries = 3;
  std::chrono::milliseconds timeout{60'000};
  std::chrono::milliseconds initial_backoff{1'000};
  int max_in_flight = 4;

  // Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

// Overlays MOBCAST_API_KEY, MOBCAST_BASE_URL and MOBCAST_MODEL when set.
ProviderConfig apply_provider_env(ProviderConfig config);

inline constexpr std::size_t kCharsPerToken = 4;

// Drops the oldest lines of the historical-stays block until the prompt fits
// in `max_chars`. Nothing outside that block is touched, so the result can
// still exceed the budget when history alone cannot absorb the overflow.
std::string fit_prompt_to_budget(std::string_view prompt, std::size_t max_chars);

class ChatProvider {
 public:
  explicit ChatProvider(std::size_t max_input_tokens = 2000)
      : max_input_tokens_(max_input_tokens) {}
  virtual ~ChatProvider() = default;
  ChatProvider(const ChatProvider&) = delete;
  ChatProvider& operator=(const ChatProvider&) = delete;

  // Applies the input budget, then sends. Throws std::invalid_argument on an
  // empty prompt and ProviderError subclasses on failure.
  std::string complete(std::string_view prompt);

  std::size_t max_input_chars() const { return max_input_tokens_ * kCharsPerToken; }
  virtual std::string name() const = 0;

 protected:
  virtual std::string send(const std::string& prompt) = 0;

 private:
  std::size_t max_input_tokens_;
};

// OpenAI-compatible chat-completions endpoint: POST {base_url}/chat/completions
// with a single user message.
class OpenAiChatProvider final : public ChatProvider {
 public:
  OpenAiChatProvider(ProviderConfig config, std::shared_ptr<HttpClient> http,
                     Sleeper sleeper = real_sleeper());

  std::string name() const override { return "openai:" + config_.model_name; }
  const ProviderConfig& config() const { return config_; }
  int attempts_made() const { return attempts_.load(); }

  nlohmann::json request_body(const std::string& prompt) const;

 protected:
  std::string send(const std::string& prompt) override;

 private:
  ProviderConfig config_;
  std::shared_ptr<HttpClient> http_;
  Sleeper sleeper_;
  std::counting_semaphore<> in_flight_;
  std::atomic<int> attempts_{0};
};

// Deterministic stand-in for a hosted model.
class MockProvider final : public ChatProvider {
 public:
  using Policy = std::function<std::string(std::string_view prompt)>;

  MockProvider(std::string name, Policy policy,
               std::size_t max_input_tokens = 2000);

  // Always answers `text`.
  static std::unique_ptr<MockProvider> echo_fixed(std::string text);
  // Reads the "most frequently visited venues" line of a rendered memory
  // section and predicts its top five by count. Prompts without that line get
  // a reply with no JSON in it.
  static std::unique_ptr<MockProvider> frequency_oracle();
  // Returns the scripted replies in order; throws ProviderError once they
  // run out.
  static std::unique_ptr<MockProvider> canned_sequence(
      std::vector<std::string> replies);

  std::string name() const override { return name_; }
  std::size_t calls() const { return calls_.load(); }
  // Prompts as sent (after budget truncation).
  std::vector<std::string> sent_prompts() const;

 protected:
  std::string send(const std::string& prompt) override;

 private:
  std::string name_;
  Policy policy_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex record_mutex_;
  std::vector<std::string> sent_;
};

std::string frequency_oracle_reply(std::string_view prompt);

// Builds a provider from a CLI tag: "openai", "mock:frequency-oracle",
// "mock:echo=<text>", "mock:canned=<file with one reply per line>".
std::unique_ptr<ChatProvider> make_provider(std::string_view tag,
                                            const ProviderConfig& config);

// ---------------------------------------------------------------------------
// Output parsing

// Every balanced {...} span in `text`, in order of their opening brace.
// String literals are honoured when matching braces.
std::vector<std::string_view> balanced_json_spans(std::string_view text);

// First balanced span that parses as a JSON object.
std::optional<nlohmann::json> first_json_object(std::string_view text);

inline constexpr std::size_t kPredictionSize = 5;

struct PredictionResult {
  std::vector<std::string> prediction;  // 1..5 ids, deduplicated, ranked
  std::string reason;

  bool operator==(const PredictionResult&) const = default;
};

// First balanced JSON object with a "prediction" key. Integer ids are turned
// into strings; the list is deduplicated in order and cut to five. Returns
// nullopt when nothing usable is found. Never throws.
std::optional<PredictionResult> parse_prediction_json(std::string_view text);

}  // namespace mobcast
