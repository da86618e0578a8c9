#include "mobcast/http.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

namespace mobcast {
namespace {

httplib::Headers to_httplib(const HttpHeaders& headers) {
  return httplib::Headers(headers.begin(), headers.end());
}

HttpResponse from_result(const httplib::Result& result) {
  HttpResponse response;
  if (!result) {
    response.error = httplib::to_string(result.error());
    return response;
  }
  response.status = result->status;
  response.body = result->body;
  return response;
}

class HttplibClient final : public HttpClient {
 public:
  explicit HttplibClient(std::chrono::milliseconds timeout) : timeout_(timeout) {}

  HttpResponse get(const std::string& url, const HttpHeaders& headers) override {
    const SplitUrl target = split_url(url);
    auto client = connect(target);
    return from_result(client.Get(target.path, to_httplib(headers)));
  }

  HttpResponse post(const std::string& url, const std::string& body,
                    const std::string& content_type,
                    const HttpHeaders& headers) override {
    const SplitUrl target = split_url(url);
    auto client = connect(target);
    return from_result(
        client.Post(target.path, to_httplib(headers), body, content_type));
  }

 private:
  httplib::Client connect(const SplitUrl& target) const {
    httplib::Client client(target.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    client.set_follow_location(true);
    return client;
  }

  std::chrono::milliseconds timeout_;
};

}  // namespace

std::shared_ptr<HttpClient> make_http_client(std::chrono::milliseconds timeout) {
  return std::make_shared<HttplibClient>(timeout);
}

SplitUrl split_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw std::invalid_argument(fmt::format("not an absolute URL: '{}'", url));
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw std::invalid_argument(fmt::format("unsupported URL scheme in '{}'", url));
  }
  const auto host_begin = scheme_end + 3;
  const auto path_begin = url.find_first_of("/?", host_begin);
  if (path_begin == host_begin) {
    throw std::invalid_argument(fmt::format("URL without host: '{}'", url));
  }
  SplitUrl split;
  split.origin = std::string{url.substr(0, path_begin)};
  if (path_begin == std::string_view::npos) {
    split.path = "/";
  } else if (url[path_begin] == '?') {
    split.path = "/" + std::string{url.substr(path_begin)};
  } else {
    split.path = std::string{url.substr(path_begin)};
  }
  return split;
}

std::string url_encode(std::string_view text) {
  std::string out;
  for (const unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += fmt::format("%{:02X}", c);
    }
  }
  return out;
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::milliseconds RetryPolicy::backoff_after(int attempt) const {
  const double scaled = static_cast<double>(initial_backoff.count()) *
                        std::pow(multiplier, std::max(0, attempt - 1));
  const double capped = std::min(scaled, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds{static_cast<long long>(capped)};
}

bool is_retryable_status(const HttpResponse& response) {
  return response.transport_failed() || response.status == 429 ||
         response.status >= 500;
}

RateLimiter::RateLimiter(std::chrono::milliseconds min_interval)
    : min_interval_(min_interval) {}

void RateLimiter::acquire() {
  std::lock_guard lock(mutex_);
  if (has_last_) {
    const auto ready = last_ + min_interval_;
    const auto now = std::chrono::steady_clock::now();
    if (now < ready) std::this_thread::sleep_until(ready);
  }
  last_ = std::chrono::steady_clock::now();
  has_last_ = true;
}

}  // namespace mobcast
