#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

namespace mobcast {

using HttpHeaders = std::multimap<std::string, std::string>;

struct HttpResponse {
  // 0 when the request never produced a response (connect/read failure).
  int status = 0;
  std::string body;
  std::string error;

  bool transport_failed() const { return status == 0; }
};

class HttpClient {
 public:
  virtual ~HttpClient() = default;
  virtual HttpResponse get(const std::string& url, const HttpHeaders& headers) = 0;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::string& content_type,
                            const HttpHeaders& headers) = 0;
};

// cpp-httplib backed client; https requires OpenSSL support at build time.
std::shared_ptr<HttpClient> make_http_client(
    std::chrono::milliseconds timeout = std::chrono::seconds{30});

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/', may carry a query string
};

// Throws std::invalid_argument for anything that is not http(s)://host...
SplitUrl split_url(std::string_view url);

std::string url_encode(std::string_view text);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

Sleeper real_sleeper();

// Exponential backoff. `max_attempts` counts every try, the first included.
struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};

  // Wait inserted after failed attempt number `attempt` (1-based).
  std::chrono::milliseconds backoff_after(int attempt) const;
};

// Transport failures, 429 and 5xx.
bool is_retryable_status(const HttpResponse& response);

// Enforces a minimum spacing between successive acquire() calls across
// threads.
class RateLimiter {
 public:
  explicit RateLimiter(std::chrono::milliseconds min_interval);
  void acquire();
  std::chrono::milliseconds min_interval() const { return min_interval_; }

 private:
  std::mutex mutex_;
  std::chrono::milliseconds min_interval_;
  std::chrono::steady_clock::time_point last_{};
  bool has_last_ = false;
};

}  // namespace mobcast
