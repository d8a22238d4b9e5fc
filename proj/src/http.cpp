// Copyright 2026 The ctnarr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ctn/http.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "ctn/error.hpp"

namespace ctn {

namespace {

std::mutex g_sleeper_mutex;
std::function<void(double)> g_sleeper;

void sleep_ms(double ms) {
  std::function<void(double)> sleeper;
  {
    std::lock_guard lock(g_sleeper_mutex);
    sleeper = g_sleeper;
  }
  if (sleeper) {
    sleeper(ms);
    return;
  }
  std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

struct SplitUrl {
  std::string origin;  // scheme://host:port
  std::string prefix;  // path prefix without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorCode::parameter, "provider URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) out.prefix = url.substr(path_start);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

double RetryPolicy::backoff_ms(int retry) const {
  const double d = base_delay_ms * std::pow(multiplier, std::max(0, retry - 1));
  return std::min(d, max_delay_ms);
}

void set_retry_sleeper(std::function<void(double ms)> sleeper) {
  std::lock_guard lock(g_sleeper_mutex);
  g_sleeper = std::move(sleeper);
}

HttpResult post_json(const HttpEndpoint& endpoint, const std::string& path, const std::string& body,
                     const RetryPolicy& policy) {
  const auto url = split_url(endpoint.base_url);
  httplib::Client client(url.origin);
  const auto secs = static_cast<time_t>(endpoint.timeout_s);
  const auto usecs = static_cast<time_t>((endpoint.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  for (const auto& [k, v] : endpoint.headers) headers.emplace(k, v);

  HttpResult result;
  const auto started = std::chrono::steady_clock::now();
  const int attempts = std::max(1, policy.max_attempts);
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    result.attempts = attempt;
    auto res = client.Post(url.prefix + path, headers, body, "application/json");
    double wait_ms = policy.backoff_ms(attempt);
    if (res) {
      if (!retryable(res->status)) {
        result.status = res->status;
        result.body = res->body;
        result.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        return result;
      }
      last_error = "HTTP " + std::to_string(res->status);
      if (res->has_header("Retry-After")) {
        try {
          wait_ms = std::min(policy.max_delay_ms, 1000.0 * std::stod(res->get_header_value("Retry-After")));
        } catch (const std::exception&) {
        }
      }
    } else {
      last_error = httplib::to_string(res.error());
    }
    if (attempt == attempts) break;
    result.retry_log.push_back("attempt " + std::to_string(attempt) + ": " + last_error);
    sleep_ms(wait_ms);
  }
  fail(ErrorCode::transport, "POST " + endpoint.base_url + path + " failed after " + std::to_string(attempts) +
                                 " attempts: " + last_error);
}

}  // namespace ctn
