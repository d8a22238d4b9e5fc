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


#include "ctn/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "ctn/error.hpp"

extern char** environ;

namespace ctn {

using nlohmann::json;

const std::vector<std::string>& PipelineConfig::sections() {
  static const std::vector<std::string> names = {"store",    "ingest", "sample",     "split",      "embedding", "llm",
                                                 "train",    "eval",   "prevalence", "engagement", "server",    "log"};
  return names;
}

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

json env_value(const std::string& raw) {
  json j = json::parse(raw, nullptr, false);
  if (!j.is_discarded() && (j.is_number() || j.is_boolean() || j.is_array() || j.is_object())) return j;
  return raw;
}

bool secret_key(const std::string& key) {
  const auto k = lower(key);
  for (const char* word : {"token", "secret", "password", "api_key", "apikey", "authorization"})
    if (k.find(word) != std::string::npos) return true;
  return k == "key" || k.ends_with("_key");
}

void redact(json& node) {
  if (!node.is_object()) return;
  for (auto& [k, v] : node.items()) {
    if (v.is_object()) {
      redact(v);
    } else if (secret_key(k) && !v.is_null()) {
      v = "***";
    }
  }
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::optional<std::filesystem::path>& file,
                                    const std::optional<std::map<std::string, std::string>>& env) {
  PipelineConfig cfg;
  if (file) {
    std::ifstream in(*file);
    if (!in) fail(ErrorCode::io, "cannot read config " + file->string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(ErrorCode::parse, file->string() + ": config must be a JSON object");
    for (auto& [section, body] : j.items()) {
      if (!body.is_object()) fail(ErrorCode::parse, file->string() + ": section '" + section + "' must be an object");
    }
    cfg.values_ = std::move(j);
  }

  std::map<std::string, std::string> vars;
  if (env) {
    vars = *env;
  } else {
    for (char** e = environ; e && *e; ++e) {
      const std::string kv(*e);
      const auto eq = kv.find('=');
      if (eq != std::string::npos) vars[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
  }
  for (const auto& [name, raw] : vars) {
    if (!name.starts_with("CTN_")) continue;
    const std::string rest = lower(name.substr(4));
    for (const auto& section : sections()) {
      if (rest.size() > section.size() + 1 && rest.starts_with(section) && rest[section.size()] == '_') {
        cfg.set(section, rest.substr(section.size() + 1), env_value(raw));
        break;
      }
    }
  }
  return cfg;
}

std::optional<json> PipelineConfig::get(std::string_view section, std::string_view key) const {
  const auto s = values_.find(std::string(section));
  if (s == values_.end() || !s->is_object()) return std::nullopt;
  const auto k = s->find(std::string(key));
  if (k == s->end() || k->is_null()) return std::nullopt;
  return std::optional<json>(std::in_place, *k);
}

void PipelineConfig::set(std::string_view section, std::string_view key, json value) {
  values_[std::string(section)][std::string(key)] = std::move(value);
}

std::string PipelineConfig::get_string(std::string_view section, std::string_view key, std::string fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  return v->is_string() ? v->get<std::string>() : v->dump();
}

double PipelineConfig::get_double(std::string_view section, std::string_view key, double fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  if (v->is_number()) return v->get<double>();
  try {
    return std::stod(v->get<std::string>());
  } catch (const std::exception&) {
    fail(ErrorCode::parse, "config " + std::string(section) + "." + std::string(key) + " is not a number");
  }
}

long long PipelineConfig::get_int(std::string_view section, std::string_view key, long long fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  if (v->is_number_integer()) return v->get<long long>();
  try {
    return std::stoll(v->is_string() ? v->get<std::string>() : v->dump());
  } catch (const std::exception&) {
    fail(ErrorCode::parse, "config " + std::string(section) + "." + std::string(key) + " is not an integer");
  }
}

bool PipelineConfig::get_bool(std::string_view section, std::string_view key, bool fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  if (v->is_boolean()) return v->get<bool>();
  const auto s = lower(v->is_string() ? v->get<std::string>() : v->dump());
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  fail(ErrorCode::parse, "config " + std::string(section) + "." + std::string(key) + " is not a boolean");
}

json PipelineConfig::redacted() const {
  json copy = values_;
  redact(copy);
  return copy;
}

}  // namespace ctn
