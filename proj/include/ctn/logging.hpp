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

// JSON-lines logger. One object per line on stderr (or a chosen stream).

#include <mutex>
#include <ostream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace ctn {

enum class LogLevel { debug, info, warn, error, off };

LogLevel parse_log_level(std::string_view s);

class Logger {
 public:
  static Logger& global();

  void set_level(LogLevel level);
  LogLevel level() const;
  void set_stream(std::ostream* out);

  void log(LogLevel level, std::string_view stage, std::string_view msg, nlohmann::ordered_json fields = {});

 private:
  mutable std::mutex mutex_;
  LogLevel level_ = LogLevel::info;
  std::ostream* out_ = nullptr;
};

inline void log_info(std::string_view stage, std::string_view msg, nlohmann::ordered_json fields = {}) {
  Logger::global().log(LogLevel::info, stage, msg, std::move(fields));
}
inline void log_warn(std::string_view stage, std::string_view msg, nlohmann::ordered_json fields = {}) {
  Logger::global().log(LogLevel::warn, stage, msg, std::move(fields));
}
inline void log_debug(std::string_view stage, std::string_view msg, nlohmann::ordered_json fields = {}) {
  Logger::global().log(LogLevel::debug, stage, msg, std::move(fields));
}

}  // namespace ctn
