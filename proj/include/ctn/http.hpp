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

#pragma once

// Minimal JSON-over-HTTP client with bounded exponential backoff, shared by
// the embedding and chat providers.

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace ctn {

struct RetryPolicy {
  int max_attempts = 5;
  double base_delay_ms = 250.0;
  double max_delay_ms = 8000.0;
  double multiplier = 2.0;

  // Delay before attempt `attempt` (1-based retry count), capped.
  double backoff_ms(int retry) const;
};

struct HttpEndpoint {
  std::string base_url;  // scheme://host[:port][/prefix]
  std::map<std::string, std::string> headers;
  double timeout_s = 120.0;
};

struct HttpResult {
  int status = 0;
  std::string body;
  int attempts = 0;
  double latency_ms = 0.0;
  std::vector<std::string> retry_log;  // one entry per retried attempt
};

// POSTs `body` as application/json to base_url + path. Transport failures,
// 429 and 5xx are retried up to policy.max_attempts, honoring Retry-After
// (seconds) when present. Other statuses return immediately. Exhausting the
// attempts throws ErrorCode::transport.
HttpResult post_json(const HttpEndpoint& endpoint, const std::string& path, const std::string& body,
                     const RetryPolicy& policy);

// Test seam: replaces the sleep used between attempts.
void set_retry_sleeper(std::function<void(double ms)> sleeper);

}  // namespace ctn
