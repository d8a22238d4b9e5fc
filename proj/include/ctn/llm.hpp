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

// Prompting harness for chat-completion models: the three instruction
// templates, similarity-selected few-shot demonstrations, verdict parsing and
// aggregation over repeated runs.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctn/evaluation.hpp"
#include "ctn/http.hpp"
#include "ctn/store.hpp"
#include "ctn/types.hpp"

namespace ctn {

enum class PromptStrategy { Simple, Justification, SBS };

std::string_view to_string(PromptStrategy s) noexcept;  // simple | justification | sbs
PromptStrategy parse_strategy(std::string_view s);

inline constexpr double kChatTemperature = 0.0;
inline constexpr int kChatMaxTokens = 1500;
inline constexpr int kDefaultRepetitions = 10;

struct ChatMessage {
  std::string role;  // user | assistant | system
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct FewShotExample {
  std::string text;
  Label label = Label::NonCT;
};

struct PromptSpec {
  PromptStrategy strategy = PromptStrategy::Simple;
  int n_shots = 0;
  std::vector<FewShotExample> examples;  // n_shots CT + n_shots non-CT
  std::string target_text;
  std::uint64_t seed = 0;  // orders the demonstrations
  bool allow_any_shots = false;
};

// The instruction for `strategy` with `text` substituted between double quotes.
std::string instruction_text(PromptStrategy strategy, std::string_view text);

// Demonstrations (user: Simple instruction around the example, assistant:
// "yes"/"no") in seed-shuffled order, then the query turn.
std::vector<ChatMessage> render_prompt(const PromptSpec& spec);

enum class ParsedOutcome { Yes, No, Unparseable };

std::string_view to_string(ParsedOutcome o) noexcept;

struct ParsedVerdict {
  ParsedOutcome outcome = ParsedOutcome::Unparseable;
  std::string justification;
};

// Case-insensitive. For SBS a standalone yes/no on the last non-empty line
// decides; otherwise the first standalone yes/no of the first sentence does.
ParsedVerdict parse_verdict(std::string_view raw, PromptStrategy strategy);

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = kChatTemperature;
  int max_tokens = kChatMaxTokens;
};

struct ChatResponse {
  std::string content;
  int attempts = 1;
  double latency_ms = 0.0;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  std::vector<std::string> retry_log;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// OpenAI-style chat completions over HTTP.
class HttpChatProvider : public ChatProvider {
 public:
  HttpChatProvider(HttpEndpoint endpoint, RetryPolicy retry, std::string path = "/v1/chat/completions")
      : endpoint_(std::move(endpoint)), retry_(retry), path_(std::move(path)) {}

  ChatResponse complete(const ChatRequest& request) override;

 private:
  HttpEndpoint endpoint_;
  RetryPolicy retry_;
  std::string path_;
};

// Deterministic offline stand-in. In `keyword` mode it labels the quoted
// query text by counting conspiracy cue words and answers in the register of
// the strategy; in `echo` mode it returns the last user message verbatim.
class MockChatProvider : public ChatProvider {
 public:
  enum class Mode { keyword, echo };
  explicit MockChatProvider(Mode mode = Mode::keyword) : mode_(mode) {}

  ChatResponse complete(const ChatRequest& request) override;
  static std::string respond(const ChatRequest& request, Mode mode);

 private:
  Mode mode_;
};

std::string encode_chat_request(const ChatRequest& request);
ChatRequest decode_chat_request(const std::string& body);
std::string encode_chat_response(const std::string& content, const std::string& model);
ChatResponse decode_chat_response(const std::string& body);

// One completion at the harness settings (temperature 0, 1500 max tokens).
ChatResponse run_llm(ChatProvider& provider, const std::vector<ChatMessage>& messages, const std::string& model);

struct LlmRunResult {
  std::string post_id;
  PromptStrategy strategy = PromptStrategy::Simple;
  int n_shots = 0;
  int run_index = 0;
  bool failed = false;
  ParsedOutcome verdict = ParsedOutcome::Unparseable;
  std::string justification;
  std::string raw_response;
  std::string error;
  int attempts = 0;
  double latency_ms = 0.0;

  PredictionRecord to_record() const;
};

std::string llm_model_id(PromptStrategy strategy, int n_shots);  // e.g. "llm:simple:3"

struct PromptRunConfig {
  PromptStrategy strategy = PromptStrategy::Simple;
  int n_shots = 0;
  int runs = kDefaultRepetitions;
  std::string model = "gpt-3.5-turbo";
  std::optional<std::string> split_id;
  bool fold_restrict = true;    // draw examples from the query's training folds only
  std::optional<int> test_fold;  // query only this fold of the split; default: every labeled document
  bool allow_any_shots = false;
  std::size_t parallel = 4;
};

struct PromptRunSummary {
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  std::size_t unparseable = 0;
};

// Runs every labeled document `runs` times, skipping (post, run) pairs that
// already have a successful record. Failures are stored, never fatal.
PromptRunSummary run_prompt_experiment(DatasetStore& store, ChatProvider& provider, const PromptRunConfig& config);

struct RunMetrics {
  int run_index = 0;
  BinaryMetrics metrics;
  std::size_t evaluated = 0;
  std::size_t unparseable = 0;
  std::size_t failed = 0;
};

struct GroupMetrics {
  std::string model_id;
  PromptStrategy strategy = PromptStrategy::Simple;
  int n_shots = 0;
  std::vector<RunMetrics> runs;
  MetricSummary precision, recall, f1, auc, unparseable_rate;
};

// Per-run metrics over parseable verdicts, then mean and sample std across runs.
std::vector<GroupMetrics> aggregate_runs(std::span<const PredictionRecord> records,
                                         const std::map<std::string, Label>& truth);

std::string group_metrics_json(std::span<const GroupMetrics> groups);
std::string group_metrics_markdown(std::span<const GroupMetrics> groups);

}  // namespace ctn
