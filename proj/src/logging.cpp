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


#include "ctn/logging.hpp"

#include <chrono>
#include <iostream>

#include "ctn/error.hpp"

namespace ctn {

LogLevel parse_log_level(std::string_view s) {
  if (s == "debug") return LogLevel::debug;
  if (s == "info") return LogLevel::info;
  if (s == "warn" || s == "warning") return LogLevel::warn;
  if (s == "error") return LogLevel::error;
  if (s == "off" || s == "quiet") return LogLevel::off;
  fail(ErrorCode::parameter, "unknown log level '" + std::string(s) + "'");
}

Logger& Logger::global() {
  static Logger logger;
  return logger;
}

void Logger::set_level(LogLevel level) {
  std::lock_guard lock(mutex_);
  level_ = level;
}

LogLevel Logger::level() const {
  std::lock_guard lock(mutex_);
  return level_;
}

void Logger::set_stream(std::ostream* out) {
  std::lock_guard lock(mutex_);
  out_ = out;
}

void Logger::log(LogLevel level, std::string_view stage, std::string_view msg, nlohmann::ordered_json fields) {
  static constexpr const char* names[] = {"debug", "info", "warn", "error", "off"};
  std::lock_guard lock(mutex_);
  if (level < level_ || level_ == LogLevel::off) return;
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  nlohmann::ordered_json line;
  line["ts"] = std::chrono::duration<double>(now).count();
  line["level"] = names[static_cast<int>(level)];
  line["stage"] = stage;
  line["msg"] = msg;
  if (fields.is_object())
    for (auto& [k, v] : fields.items()) line[k] = v;
  std::ostream& out = out_ ? *out_ : std::cerr;
  out << line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  out.flush();
}

}  // namespace ctn
