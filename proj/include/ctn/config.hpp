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

// Pipeline configuration: a JSON file with one object per section, overridden
// by CTN_<SECTION>_<KEY> environment variables, overridden in turn by flags.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ctn {

class PipelineConfig {
 public:
  // Sections recognised in environment variable names.
  static const std::vector<std::string>& sections();

  // `env` defaults to the process environment.
  static PipelineConfig load(const std::optional<std::filesystem::path>& file,
                             const std::optional<std::map<std::string, std::string>>& env = std::nullopt);

  std::optional<nlohmann::json> get(std::string_view section, std::string_view key) const;
  void set(std::string_view section, std::string_view key, nlohmann::json value);

  std::string get_string(std::string_view section, std::string_view key, std::string fallback) const;
  double get_double(std::string_view section, std::string_view key, double fallback) const;
  long long get_int(std::string_view section, std::string_view key, long long fallback) const;
  bool get_bool(std::string_view section, std::string_view key, bool fallback) const;

  const nlohmann::json& values() const { return values_; }
  // Same tree with secret-looking keys (token, key, secret, password) masked.
  nlohmann::json redacted() const;

 private:
  nlohmann::json values_ = nlohmann::json::object();
};

}  // namespace ctn
