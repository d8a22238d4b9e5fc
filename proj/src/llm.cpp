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

#include "ctn/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <future>
#include <set>

#include <nlohmann/json.hpp>

#include "ctn/embedding.hpp"
#include "ctn/error.hpp"
#include "ctn/random.hpp"
#include "ctn/stats.hpp"

namespace ctn {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kQuestion = "Decide whether the following text describes a conspiracy theory or not (yes/no).";
constexpr std::string_view kJustify = " Justify your answer.";
constexpr std::string_view kSteps =
    " First, extract the narrative or claim from the text. Second, decide if the claim is a known conspiracy theory "
    "or suggests a hidden plan. Third, decide if the text agrees with or supports the conspiracy theory or plan. "
    "Fourth, answer the question (yes/no).";

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

struct TokenHit {
  ParsedOutcome outcome;
  std::size_t pos;
  std::size_t len;
};

// Standalone yes/no tokens in `s` (already lowercase), in order.
std::vector<TokenHit> verdict_tokens(std::string_view s) {
  std::vector<TokenHit> hits;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0 && is_word_char(s[i - 1])) continue;
    for (auto [word, outcome] : {std::pair{std::string_view("yes"), ParsedOutcome::Yes},
                                 std::pair{std::string_view("no"), ParsedOutcome::No}}) {
      if (s.substr(i, word.size()) == word && (i + word.size() == s.size() || !is_word_char(s[i + word.size()]))) {
        hits.push_back({outcome, i, word.size()});
      }
    }
  }
  return hits;
}

std::size_t first_sentence_end(std::string_view s) {
  const auto end = s.find_first_of(".!?\n");
  return end == std::string_view::npos ? s.size() : end;
}

}  // namespace

std::string_view to_string(PromptStrategy s) noexcept {
  switch (s) {
    case PromptStrategy::Simple: return "simple";
    case PromptStrategy::Justification: return "justification";
    case PromptStrategy::SBS: return "sbs";
  }
  return "simple";
}

PromptStrategy parse_strategy(std::string_view s) {
  const auto l = lower(s);
  if (l == "simple") return PromptStrategy::Simple;
  if (l == "justification") return PromptStrategy::Justification;
  if (l == "sbs" || l == "step-by-step") return PromptStrategy::SBS;
  fail(ErrorCode::parameter, "unknown prompt strategy '" + std::string(s) + "' (simple, justification, sbs)");
}

std::string_view to_string(ParsedOutcome o) noexcept {
  switch (o) {
    case ParsedOutcome::Yes: return "Yes";
    case ParsedOutcome::No: return "No";
    case ParsedOutcome::Unparseable: return "Unparseable";
  }
  return "Unparseable";
}

std::string instruction_text(PromptStrategy strategy, std::string_view text) {
  std::string out(kQuestion);
  if (strategy == PromptStrategy::Justification) out += kJustify;
  if (strategy == PromptStrategy::SBS) out += kSteps;
  out += " \"";
  out += text;
  out += "\"";
  return out;
}

std::vector<ChatMessage> render_prompt(const PromptSpec& spec) {
  if (!spec.allow_any_shots && spec.n_shots != 0 && spec.n_shots != 1 && spec.n_shots != 3 && spec.n_shots != 5)
    fail(ErrorCode::parameter, "n_shots must be one of 0, 1, 3, 5 (got " + std::to_string(spec.n_shots) + ")");
  if (spec.n_shots < 0) fail(ErrorCode::parameter, "n_shots must be non-negative");
  const auto n = static_cast<std::size_t>(spec.n_shots);
  const auto positives = static_cast<std::size_t>(
      std::count_if(spec.examples.begin(), spec.examples.end(), [](const auto& e) { return e.label == Label::CT; }));
  if (spec.examples.size() != 2 * n || positives != n)
    fail(ErrorCode::parameter, "prompt needs " + std::to_string(n) + " CT and " + std::to_string(n) +
                                   " non-CT examples, got " + std::to_string(positives) + " and " +
                                   std::to_string(spec.examples.size() - positives));

  std::vector<FewShotExample> ordered = spec.examples;
  Rng rng(spec.seed);
  rng.shuffle(std::span<FewShotExample>(ordered));

  std::vector<ChatMessage> messages;
  messages.reserve(2 * ordered.size() + 1);
  for (const auto& ex : ordered) {
    messages.push_back({"user", instruction_text(PromptStrategy::Simple, ex.text)});
    messages.push_back({"assistant", ex.label == Label::CT ? "yes" : "no"});
  }
  messages.push_back({"user", instruction_text(spec.strategy, spec.target_text)});
  return messages;
}

ParsedVerdict parse_verdict(std::string_view raw, PromptStrategy strategy) {
  const std::string_view text = trim(raw);
  const std::string low = lower(text);
  ParsedVerdict out;

  if (strategy == PromptStrategy::SBS) {
    auto line_end = low.find_last_not_of(" \t\r\n");
    if (line_end != std::string::npos) {
      const auto line_start = low.rfind('\n', line_end);
      const std::size_t start = line_start == std::string::npos ? 0 : line_start + 1;
      const auto hits = verdict_tokens(std::string_view(low).substr(start, line_end + 1 - start));
      if (!hits.empty() && start > 0) {
        out.outcome = hits.back().outcome;
        out.justification = std::string(trim(text.substr(0, start)));
        return out;
      }
    }
  }

  const std::size_t end = first_sentence_end(low);
  const auto hits = verdict_tokens(std::string_view(low).substr(0, end));
  if (hits.empty()) {
    out.outcome = ParsedOutcome::Unparseable;
    out.justification = std::string(text);
    return out;
  }
  out.outcome = hits.front().outcome;
  std::string_view rest = end < text.size() ? trim(text.substr(end + 1)) : std::string_view{};
  if (rest.empty()) {
    // Single-sentence answer: whatever follows the verdict word.
    std::string_view tail = text.substr(std::min(text.size(), hits.front().pos + hits.front().len));
    if (end < text.size()) tail = tail.substr(0, end - (hits.front().pos + hits.front().len));
    while (!tail.empty() && (std::ispunct(static_cast<unsigned char>(tail.front())) || tail.front() == ' '))
      tail.remove_prefix(1);
    rest = trim(tail);
  }
  out.justification = std::string(rest);
  return out;
}

std::string encode_chat_request(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  return json{{"model", request.model},
              {"messages", messages},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}}
      .dump();
}

ChatRequest decode_chat_request(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("messages")) fail(ErrorCode::parse, "chat request lacks messages");
  ChatRequest r;
  r.model = j.value("model", "");
  r.temperature = j.value("temperature", kChatTemperature);
  r.max_tokens = j.value("max_tokens", kChatMaxTokens);
  for (const auto& m : j["messages"]) r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  return r;
}

std::string encode_chat_response(const std::string& content, const std::string& model) {
  return json{{"object", "chat.completion"},
              {"model", model},
              {"choices", json::array({{{"index", 0},
                                        {"message", {{"role", "assistant"}, {"content", content}}},
                                        {"finish_reason", "stop"}}})},
              {"usage", {{"prompt_tokens", 0}, {"completion_tokens", 0}}}}
      .dump();
}

ChatResponse decode_chat_response(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::parse, "chat response is not JSON");
  ChatResponse r;
  try {
    r.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("chat response: ") + e.what());
  }
  if (j.contains("usage") && j["usage"].is_object()) {
    r.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    r.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  return r;
}

ChatResponse HttpChatProvider::complete(const ChatRequest& request) {
  const auto result = post_json(endpoint_, path_, encode_chat_request(request), retry_);
  if (result.status != 200)
    fail(ErrorCode::transport, "chat provider returned HTTP " + std::to_string(result.status) + ": " +
                                   result.body.substr(0, 200));
  ChatResponse r = decode_chat_response(result.body);
  r.attempts = result.attempts;
  r.latency_ms = result.latency_ms;
  r.retry_log = result.retry_log;
  return r;
}

std::string MockChatProvider::respond(const ChatRequest& request, Mode mode) {
  const ChatMessage* last = nullptr;
  for (const auto& m : request.messages)
    if (m.role == "user") last = &m;
  if (last == nullptr) return "";
  if (mode == Mode::echo) return last->content;

  const std::string& prompt = last->content;
  const auto open = prompt.find('"');
  const auto close = prompt.rfind('"');
  const std::string text =
      open != std::string::npos && close > open ? lower(prompt.substr(open + 1, close - open - 1)) : lower(prompt);
  if (text.find("???") != std::string::npos) return "The text is ambiguous.";

  static const std::set<std::string> cues = {
      "secret", "secretly", "plan", "plot", "agenda", "cover", "coverup", "hidden", "hide", "hiding",
      "elite", "elites", "cabal", "depopulation", "chemtrails", "globalist", "globalists", "psyop", "staged",
      "orchestrated", "puppet", "puppets", "controlled", "nwo", "lying", "engineered", "suppressed"};
  int hits = 0;
  std::string word;
  for (char c : text + " ") {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      word.push_back(c);
    } else if (!word.empty()) {
      hits += cues.count(word) ? 1 : 0;
      word.clear();
    }
  }
  const bool yes = hits >= 2;
  if (prompt.find("Fourth, answer the question") != std::string::npos) {
    return std::string("First, the claim is summarized from the text.\n") +
           (yes ? "Second, it suggests a hidden plan.\nThird, the author supports it.\nAnswer: Yes"
                : "Second, it does not suggest a hidden plan.\nThird, the author does not support one.\nAnswer: No");
  }
  if (prompt.find("Justify your answer.") != std::string::npos) {
    return yes ? "Yes. The text attributes events to a secret plan by a powerful group."
               : "No. The text does not accuse anyone of a secret malevolent plan.";
  }
  return yes ? "Yes." : "No.";
}

ChatResponse MockChatProvider::complete(const ChatRequest& request) {
  ChatResponse r;
  r.content = respond(request, mode_);
  return r;
}

ChatResponse run_llm(ChatProvider& provider, const std::vector<ChatMessage>& messages, const std::string& model) {
  ChatRequest request;
  request.model = model;
  request.messages = messages;
  request.temperature = kChatTemperature;
  request.max_tokens = kChatMaxTokens;
  return provider.complete(request);
}

std::string llm_model_id(PromptStrategy strategy, int n_shots) {
  return "llm:" + std::string(to_string(strategy)) + ":" + std::to_string(n_shots);
}

PredictionRecord LlmRunResult::to_record() const {
  PredictionRecord r;
  r.post_id = post_id;
  r.model_id = llm_model_id(strategy, n_shots);
  r.run_index = run_index;
  r.attempts = attempts;
  r.latency_ms = latency_ms;
  if (failed) {
    r.status = "failed";
    r.error = error;
    return r;
  }
  r.raw_response = raw_response;
  r.verdict = std::string(to_string(verdict));
  if (!justification.empty()) r.justification = justification;
  if (verdict != ParsedOutcome::Unparseable) {
    r.label = verdict == ParsedOutcome::Yes ? Label::CT : Label::NonCT;
    r.score = verdict == ParsedOutcome::Yes ? 1.0 : 0.0;
  }
  return r;
}

PromptRunSummary run_prompt_experiment(DatasetStore& store, ChatProvider& provider, const PromptRunConfig& config) {
  if (config.runs < 1) fail(ErrorCode::parameter, "prompt-run: runs must be >= 1");
  if (!config.allow_any_shots && config.n_shots != 0 && config.n_shots != 1 && config.n_shots != 3 && config.n_shots != 5)
    fail(ErrorCode::parameter, "n_shots must be one of 0, 1, 3, 5");

  const auto labels = store.labels();
  std::map<std::string, Label> truth;
  for (const auto& s : labels) truth[s.post_id] = s.label;
  std::vector<std::string> labeled_ids;
  for (const auto& s : labels)
    if (store.has_document(s.post_id)) labeled_ids.push_back(s.post_id);

  std::map<std::string, int> fold_of;
  if (config.split_id) {
    for (const auto& a : store.get_split(*config.split_id).assignments) fold_of[a.post_id] = a.fold;
  }
  std::vector<std::string> queries;
  for (const auto& id : labeled_ids) {
    if (config.test_fold) {
      const auto it = fold_of.find(id);
      if (it == fold_of.end() || it->second != *config.test_fold) continue;
    }
    queries.push_back(id);
  }

  Eigen::MatrixXd vectors;
  std::map<std::string, Eigen::Index> row_of;
  if (config.n_shots > 0) {
    vectors = store.embedding_matrix(labeled_ids);
    for (std::size_t i = 0; i < labeled_ids.size(); ++i) row_of[labeled_ids[i]] = static_cast<Eigen::Index>(i);
  }
  const bool restrict = config.split_id && config.fold_restrict;
  std::map<int, std::pair<ExamplePool, ExamplePool>> pools;  // by query fold, -1: unrestricted
  const auto pool_for = [&](int fold) -> const std::pair<ExamplePool, ExamplePool>& {
    auto it = pools.find(fold);
    if (it != pools.end()) return it->second;
    std::vector<Eigen::Index> pos_rows, neg_rows;
    ExamplePool pos, neg;
    for (const auto& id : labeled_ids) {
      if (fold >= 0) {
        const auto f = fold_of.find(id);
        if (f == fold_of.end() || f->second == fold) continue;
      }
      auto& pool = truth.at(id) == Label::CT ? pos : neg;
      pool.ids.push_back(id);
      (truth.at(id) == Label::CT ? pos_rows : neg_rows).push_back(row_of.at(id));
    }
    pos.vectors = vectors(pos_rows, Eigen::all);
    neg.vectors = vectors(neg_rows, Eigen::all);
    return pools.emplace(fold, std::make_pair(std::move(pos), std::move(neg))).first->second;
  };

  const std::string model_id = llm_model_id(config.strategy, config.n_shots);
  std::set<std::pair<std::string, int>> done;
  for (const auto& r : store.predictions(model_id))
    if (r.status == "ok") done.insert({r.post_id, r.run_index});

  PromptRunSummary summary;
  const std::size_t width = std::max<std::size_t>(1, config.parallel);
  for (int run = 0; run < config.runs; ++run) {
    std::vector<std::string> pending;
    for (const auto& id : queries) {
      if (done.count({id, run})) {
        ++summary.skipped;
      } else {
        pending.push_back(id);
      }
    }
    for (std::size_t start = 0; start < pending.size(); start += width) {
      const std::size_t end = std::min(pending.size(), start + width);
      std::vector<PromptSpec> specs;
      for (std::size_t i = start; i < end; ++i) {
        const auto& id = pending[i];
        PromptSpec spec;
        spec.strategy = config.strategy;
        spec.n_shots = config.n_shots;
        spec.allow_any_shots = config.allow_any_shots;
        spec.seed = static_cast<std::uint64_t>(run);
        spec.target_text = store.get_document(id).text;
        if (config.n_shots > 0) {
          int fold = -1;
          if (restrict) {
            const auto f = fold_of.find(id);
            if (f != fold_of.end()) fold = f->second;
          }
          const auto& [pos, neg] = pool_for(fold);
          const auto picked = select_examples(id, vectors.row(row_of.at(id)), static_cast<std::size_t>(config.n_shots), pos, neg);
          for (const auto& nb : picked.positive) spec.examples.push_back({store.get_document(nb.id).text, Label::CT});
          for (const auto& nb : picked.negative) spec.examples.push_back({store.get_document(nb.id).text, Label::NonCT});
        }
        specs.push_back(std::move(spec));
      }
      std::vector<std::future<LlmRunResult>> inflight;
      for (std::size_t i = start; i < end; ++i) {
        inflight.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred,
                                      [&, i, spec = specs[i - start]] {
                                        LlmRunResult res;
                                        res.post_id = pending[i];
                                        res.strategy = config.strategy;
                                        res.n_shots = config.n_shots;
                                        res.run_index = run;
                                        try {
                                          const auto response = run_llm(provider, render_prompt(spec), config.model);
                                          res.raw_response = response.content;
                                          res.attempts = response.attempts;
                                          res.latency_ms = response.latency_ms;
                                          const auto parsed = parse_verdict(response.content, config.strategy);
                                          res.verdict = parsed.outcome;
                                          res.justification = parsed.justification;
                                        } catch (const Error& e) {
                                          res.failed = true;
                                          res.error = std::string(to_string(e.code())) + ": " + e.what();
                                        }
                                        return res;
                                      }));
      }
      std::vector<PredictionRecord> batch;
      for (std::size_t i = start; i < end; ++i) {
        const LlmRunResult res = inflight[i - start].get();
        PredictionRecord rec = res.to_record();
        const Document doc = store.get_document(res.post_id);
        rec.subreddit = doc.subreddit;
        rec.num_comments = doc.num_comments;
        rec.karma = doc.karma;
        if (res.failed) {
          ++summary.failed;
        } else {
          ++summary.completed;
          if (res.verdict == ParsedOutcome::Unparseable) ++summary.unparseable;
        }
        batch.push_back(std::move(rec));
      }
      store.put_predictions(batch);
    }
  }
  return summary;
}

std::vector<GroupMetrics> aggregate_runs(std::span<const PredictionRecord> records,
                                         const std::map<std::string, Label>& truth) {
  std::map<std::string, std::map<int, std::vector<const PredictionRecord*>>> grouped;
  for (const auto& r : records)
    if (r.model_id.rfind("llm:", 0) == 0) grouped[r.model_id][r.run_index].push_back(&r);

  std::vector<GroupMetrics> out;
  for (const auto& [model_id, runs] : grouped) {
    GroupMetrics g;
    g.model_id = model_id;
    const auto second = model_id.find(':', 4);
    g.strategy = parse_strategy(model_id.substr(4, second - 4));
    g.n_shots = std::stoi(model_id.substr(second + 1));
    std::vector<double> p, rc, f, a, un;
    for (const auto& [run_index, recs] : runs) {
      RunMetrics rm;
      rm.run_index = run_index;
      std::vector<Label> predicted, actual;
      for (const auto* r : recs) {
        if (r->status != "ok") {
          ++rm.failed;
          continue;
        }
        const auto t = truth.find(r->post_id);
        if (t == truth.end()) continue;
        if (!r->label) {
          ++rm.unparseable;
          continue;
        }
        predicted.push_back(*r->label);
        actual.push_back(t->second);
      }
      rm.evaluated = predicted.size();
      std::vector<double> scores;
      for (auto l : predicted) scores.push_back(l == Label::CT ? 1.0 : 0.0);
      rm.metrics = binary_metrics(scores, actual, 0.5);
      p.push_back(rm.metrics.precision);
      rc.push_back(rm.metrics.recall);
      f.push_back(rm.metrics.f1);
      if (rm.metrics.auc) a.push_back(*rm.metrics.auc);
      const std::size_t answered = rm.evaluated + rm.unparseable;
      un.push_back(answered ? static_cast<double>(rm.unparseable) / static_cast<double>(answered) : 0.0);
      g.runs.push_back(rm);
    }
    g.precision = summarize(p);
    g.recall = summarize(rc);
    g.f1 = summarize(f);
    g.auc = summarize(a);
    g.unparseable_rate = summarize(un);
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end(), [](const GroupMetrics& x, const GroupMetrics& y) {
    if (x.strategy != y.strategy) return x.strategy < y.strategy;
    return x.n_shots < y.n_shots;
  });
  return out;
}

namespace {

ordered_json summary_json(const MetricSummary& s) { return ordered_json{{"mean", s.mean}, {"std", s.std}, {"n", s.n}}; }

std::string pm(double mean, double sd, const char* pattern) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, mean, sd);
  return buf;
}

}  // namespace

std::string group_metrics_json(std::span<const GroupMetrics> groups) {
  ordered_json arr = ordered_json::array();
  for (const auto& g : groups) {
    ordered_json j;
    j["model_id"] = g.model_id;
    j["strategy"] = to_string(g.strategy);
    j["n_shots"] = g.n_shots;
    j["runs"] = g.runs.size();
    j["precision"] = summary_json(g.precision);
    j["recall"] = summary_json(g.recall);
    j["f1"] = summary_json(g.f1);
    j["auc"] = summary_json(g.auc);
    j["unparseable_rate"] = summary_json(g.unparseable_rate);
    ordered_json per_run = ordered_json::array();
    for (const auto& r : g.runs) {
      ordered_json rj;
      rj["run_index"] = r.run_index;
      rj["evaluated"] = r.evaluated;
      rj["unparseable"] = r.unparseable;
      rj["failed"] = r.failed;
      rj["precision"] = r.metrics.precision;
      rj["recall"] = r.metrics.recall;
      rj["f1"] = r.metrics.f1;
      rj["auc"] = r.metrics.auc ? ordered_json(*r.metrics.auc) : ordered_json(nullptr);
      rj["confusion"] = {{"tp", r.metrics.confusion.tp},
                         {"fp", r.metrics.confusion.fp},
                         {"tn", r.metrics.confusion.tn},
                         {"fn", r.metrics.confusion.fn}};
      rj["precision_undefined"] = r.metrics.precision_undefined;
      per_run.push_back(rj);
    }
    j["per_run"] = per_run;
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

std::string group_metrics_markdown(std::span<const GroupMetrics> groups) {
  std::string out = "| Setting | Precision | Recall | F1 | AUC | Unparseable |\n|---|---:|---:|---:|---:|---:|\n";
  for (const auto& g : groups) {
    out += "| " + std::string(to_string(g.strategy)) + " " + std::to_string(g.n_shots) + "-shot | " +
           pm(100.0 * g.precision.mean, 100.0 * g.precision.std, "%.2f%% ± %.2f") + " | " +
           pm(100.0 * g.recall.mean, 100.0 * g.recall.std, "%.2f%% ± %.2f") + " | " +
           pm(g.f1.mean, g.f1.std, "%.3f ± %.3f") + " | " + pm(g.auc.mean, g.auc.std, "%.3f ± %.3f") + " | " +
           pm(100.0 * g.unparseable_rate.mean, 100.0 * g.unparseable_rate.std, "%.1f%% ± %.1f") + " |\n";
  }
  return out;
}

}  // namespace ctn
