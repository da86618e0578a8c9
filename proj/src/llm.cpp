#include "mobcast/llm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>

#include <fmt/format.h>

namespace mobcast {
namespace {

using json = nlohmann::json;

constexpr std::string_view kHistoryHeaders[] = {"<historical_stays>: [",
                                                "<historical>: ["};

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string{s.substr(first, last - first + 1)};
}

std::optional<std::string> id_from_json(const json& value) {
  if (value.is_string()) {
    std::string id = trim(value.get_ref<const std::string&>());
    if (id.empty()) return std::nullopt;
    return id;
  }
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  if (value.is_number_unsigned()) {
    return std::to_string(value.get<unsigned long long>());
  }
  if (value.is_number_float()) {
    const double d = value.get<double>();
    if (!std::isfinite(d)) return std::nullopt;
    if (d == std::floor(d) && std::abs(d) < 1e15) {
      return std::to_string(static_cast<long long>(d));
    }
    return value.dump();
  }
  return std::nullopt;
}

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<>& sem) : sem_(sem) {
    sem_.acquire();
  }
  ~SemaphoreGuard() { sem_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

}  // namespace

void ProviderConfig::validate() const {
  if (!(temperature >= 0.0)) {
    throw std::invalid_argument("temperature must be >= 0");
  }
  if (max_output_tokens < 1 || max_input_tokens < 1) {
    throw std::invalid_argument("token limits must be >= 1");
  }
  if (retries < 1) throw std::invalid_argument("retries must be >= 1");
  if (max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
}

ProviderConfig apply_provider_env(ProviderConfig config) {
  if (const char* key = std::getenv("MOBCAST_API_KEY"); key && *key) {
    config.api_key = key;
  }
  if (const char* url = std::getenv("MOBCAST_BASE_URL"); url && *url) {
    config.base_url = url;
  }
  if (const char* model = std::getenv("MOBCAST_MODEL"); model && *model) {
    config.model_name = model;
  }
  return config;
}

std::string fit_prompt_to_budget(std::string_view prompt, std::size_t max_chars) {
  if (prompt.size() <= max_chars) return std::string{prompt};
  auto lines = split_lines(prompt);

  std::size_t header = lines.size();
  for (std::size_t i = 0; i < lines.size() && header == lines.size(); ++i) {
    for (const auto h : kHistoryHeaders) {
      if (lines[i] == h) header = i;
    }
  }
  if (header == lines.size()) return std::string{prompt};
  std::size_t close = header + 1;
  while (close < lines.size() && lines[close] != "]") ++close;
  if (close == lines.size()) return std::string{prompt};

  // Each dropped item line frees its length plus the newline.
  std::size_t size = prompt.size();
  std::size_t first_kept = header + 1;
  while (size > max_chars && first_kept < close) {
    size -= lines[first_kept].size() + 1;
    ++first_kept;
  }

  std::string out;
  out.reserve(prompt.size());
  const auto emit = [&out](std::string_view line, bool newline) {
    out += line;
    if (newline) out += '\n';
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const bool newline = i + 1 < lines.size();
    if (i == header && first_kept == close) {
      // Whole block gone: "<historical_stays>: []".
      std::string collapsed{lines[header]};
      collapsed += ']';
      emit(collapsed, newline);
      i = close;  // skip items and the closing bracket
      continue;
    }
    if (i > header && i < first_kept) continue;
    emit(lines[i], newline);
  }
  return out;
}

std::string ChatProvider::complete(std::string_view prompt) {
  if (prompt.empty()) throw std::invalid_argument("empty prompt");
  return send(fit_prompt_to_budget(prompt, max_input_chars()));
}

OpenAiChatProvider::OpenAiChatProvider(ProviderConfig config,
                                       std::shared_ptr<HttpClient> http,
                                       Sleeper sleeper)
    : ChatProvider(static_cast<std::size_t>(std::max(1, config.max_input_tokens))),
      config_(std::move(config)),
      http_(std::move(http)),
      sleeper_(std::move(sleeper)),
      in_flight_(std::max(1, config_.max_in_flight)) {
  config_.validate();
}

json OpenAiChatProvider::request_body(const std::string& prompt) const {
  json body;
  body["model"] = config_.model_name;
  body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = config_.temperature;
  body["max_tokens"] = config_.max_output_tokens;
  return body;
}

std::string OpenAiChatProvider::send(const std::string& prompt) {
  SemaphoreGuard guard(in_flight_);
  std::string url = config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/chat/completions";
  HttpHeaders headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }
  const std::string body = request_body(prompt).dump();

  RetryPolicy policy;
  policy.max_attempts = config_.retries;
  policy.initial_backoff = config_.initial_backoff;

  std::string last_error;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    ++attempts_;
    const HttpResponse response =
        http_->post(url, body, "application/json", headers);
    if (response.status == 200) {
      const json parsed = json::parse(response.body, nullptr, false);
      try {
        if (!parsed.is_discarded()) {
          const auto& content =
              parsed.at("choices").at(0).at("message").at("content");
          if (content.is_string()) return content.get<std::string>();
        }
      } catch (const json::exception&) {
      }
      last_error = "malformed completion response";
    } else if (response.status == 401) {
      throw AuthError(fmt::format("{}: HTTP 401 unauthorized", url));
    } else if (is_retryable_status(response)) {
      last_error = response.transport_failed()
                       ? response.error
                       : fmt::format("HTTP {}", response.status);
    } else {
      throw ProviderError(
          fmt::format("{}: HTTP {}: {}", url, response.status, response.body));
    }
    if (attempt < policy.max_attempts) sleeper_(policy.backoff_after(attempt));
  }
  throw ProviderUnavailable(fmt::format("{}: giving up after {} attempts ({})",
                                        url, policy.max_attempts, last_error));
}

MockProvider::MockProvider(std::string name, Policy policy,
                           std::size_t max_input_tokens)
    : ChatProvider(max_input_tokens),
      name_(std::move(name)),
      policy_(std::move(policy)) {}

std::unique_ptr<MockProvider> MockProvider::echo_fixed(std::string text) {
  return std::make_unique<MockProvider>(
      "mock:echo", [text = std::move(text)](std::string_view) { return text; });
}

std::unique_ptr<MockProvider> MockProvider::frequency_oracle() {
  return std::make_unique<MockProvider>("mock:frequency-oracle",
                                        frequency_oracle_reply);
}

std::unique_ptr<MockProvider> MockProvider::canned_sequence(
    std::vector<std::string> replies) {
  auto next = std::make_shared<std::atomic<std::size_t>>(0);
  return std::make_unique<MockProvider>(
      "mock:canned",
      [replies = std::move(replies), next](std::string_view) -> std::string {
        const std::size_t i = next->fetch_add(1);
        if (i >= replies.size()) {
          throw ProviderError(fmt::format(
              "canned sequence exhausted after {} replies", replies.size()));
        }
        return replies[i];
      });
}

std::vector<std::string> MockProvider::sent_prompts() const {
  std::lock_guard lock(record_mutex_);
  return sent_;
}

std::string MockProvider::send(const std::string& prompt) {
  ++calls_;
  {
    std::lock_guard lock(record_mutex_);
    sent_.push_back(prompt);
  }
  return policy_(prompt);
}

std::string frequency_oracle_reply(std::string_view prompt) {
  constexpr std::string_view kMarker = "The most frequently visited venues are ";
  const auto at = prompt.find(kMarker);
  if (at == std::string_view::npos) return "No usable memory in the prompt.";
  const auto begin = at + kMarker.size();
  const auto end = prompt.find('\n', begin);
  std::string line{prompt.substr(begin, end == std::string_view::npos
                                            ? std::string_view::npos
                                            : end - begin)};

  static const std::regex kEntry(R"(([^,\s][^,]*?) \((\d+) times\))");
  std::vector<std::pair<std::string, long long>> counts;
  for (auto it = std::sregex_iterator(line.begin(), line.end(), kEntry);
       it != std::sregex_iterator(); ++it) {
    counts.emplace_back((*it)[1].str(), std::stoll((*it)[2].str()));
  }
  if (counts.empty()) return "No usable memory in the prompt.";
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  json reply;
  reply["prediction"] = json::array();
  for (std::size_t i = 0; i < counts.size() && i < kPredictionSize; ++i) {
    reply["prediction"].push_back(counts[i].first);
  }
  reply["reason"] = "most frequently visited venues in long-term memory";
  return reply.dump();
}

std::unique_ptr<ChatProvider> make_provider(std::string_view tag,
                                            const ProviderConfig& config) {
  const auto max_tokens = static_cast<std::size_t>(config.max_input_tokens);
  if (tag == "openai") {
    return std::make_unique<OpenAiChatProvider>(config,
                                                make_http_client(config.timeout));
  }
  if (tag == "mock:frequency-oracle") {
    return std::make_unique<MockProvider>("mock:frequency-oracle",
                                          frequency_oracle_reply, max_tokens);
  }
  if (tag.starts_with("mock:echo=")) {
    std::string text{tag.substr(10)};
    return std::make_unique<MockProvider>(
        "mock:echo", [text](std::string_view) { return text; }, max_tokens);
  }
  if (tag.starts_with("mock:canned=")) {
    const std::string path{tag.substr(12)};
    std::ifstream in(path);
    if (!in) throw std::invalid_argument(fmt::format("cannot read '{}'", path));
    std::vector<std::string> replies;
    for (std::string line; std::getline(in, line);) replies.push_back(line);
    auto provider = MockProvider::canned_sequence(std::move(replies));
    return provider;
  }
  throw std::invalid_argument(fmt::format("unknown provider '{}'", tag));
}

std::vector<std::string_view> balanced_json_spans(std::string_view text) {
  std::vector<std::string_view> spans;
  for (std::size_t open = text.find('{'); open != std::string_view::npos;
       open = text.find('{', open + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t j = open; j < text.size(); ++j) {
      const char c = text[j];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          spans.push_back(text.substr(open, j - open + 1));
          break;
        }
      }
    }
  }
  return spans;
}

std::optional<json> first_json_object(std::string_view text) {
  for (const auto span : balanced_json_spans(text)) {
    json parsed = json::parse(span, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

std::optional<PredictionResult> parse_prediction_json(std::string_view text) {
  try {
    for (const auto span : balanced_json_spans(text)) {
      const json parsed = json::parse(span, nullptr, /*allow_exceptions=*/false);
      if (!parsed.is_object()) continue;
      const auto it = parsed.find("prediction");
      if (it == parsed.end()) continue;

      PredictionResult result;
      std::set<std::string> seen;
      const auto take = [&](const json& value) {
        auto id = id_from_json(value);
        if (id && seen.insert(*id).second) result.prediction.push_back(*id);
      };
      if (it->is_array()) {
        for (const auto& value : *it) take(value);
      } else {
        take(*it);
      }
      if (result.prediction.empty()) continue;
      if (result.prediction.size() > kPredictionSize) {
        result.prediction.resize(kPredictionSize);
      }
      if (const auto reason = parsed.find("reason"); reason != parsed.end()) {
        result.reason = reason->is_string() ? reason->get<std::string>()
                                            : reason->is_null() ? ""
                                                                : reason->dump();
      }
      return result;
    }
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

}  // namespace mobcast
