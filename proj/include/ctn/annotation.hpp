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

// Multi-coder annotation campaigns. State is an append-only event log in the
// store directory (annotation_audit.ndjson); the in-memory view is whatever
// replaying that log yields.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "ctn/error.hpp"
#include "ctn/stats.hpp"
#include "ctn/store.hpp"
#include "ctn/types.hpp"

namespace ctn {

enum class PhaseStatus { open, in_discussion, closed };

std::string_view to_string(PhaseStatus s) noexcept;  // open | in-discussion | closed

struct AnnotationRecord {
  std::string post_id;
  std::string coder_id;
  std::string rater_id;  // coder, or the coder's group in group mode
  Verdict verdict = Verdict::No;
  std::string phase_id;
  CodingPhase phase = CodingPhase::pilot;
  int round = 1;
  std::int64_t timestamp = 0;
};

struct PhaseConfig {
  std::string id;
  CodingPhase kind = CodingPhase::pilot;
  int round = 1;
  std::vector<std::string> samples;
  std::vector<std::string> coders;
  std::map<std::string, std::string> groups;  // coder -> group; empty: every coder rates alone
  bool auto_consensus = false;

  std::vector<std::string> raters() const;  // sorted coder or group ids
};

struct PhaseView {
  PhaseConfig config;
  PhaseStatus status = PhaseStatus::open;
  std::map<std::string, Verdict> consensus;
  std::map<std::pair<std::string, std::string>, Verdict> verdicts;  // (post_id, rater) -> latest
  std::size_t fully_labeled = 0;
};

struct DisagreementItem {
  std::string post_id;
  int yes = 0;
  int no = 0;
  std::map<std::string, Verdict> by_rater;
  std::optional<Verdict> consensus;
};

struct RaterProgress {
  std::string rater;
  std::size_t done = 0;
  std::size_t total = 0;
  std::optional<double> agreement_with_consensus;
  std::size_t consensus_items = 0;
};

struct AgreementReport {
  std::string phase_id;
  std::vector<std::string> raters;
  // Pairwise Cohen's kappa over the items both raters labeled; nullopt where undefined.
  std::vector<std::vector<std::optional<KappaResult>>> pairwise;
  std::optional<KappaResult> fleiss;  // items every rater labeled, >= 2 raters
  std::string fleiss_note;
  std::vector<RaterProgress> progress;
  std::size_t samples = 0;
  std::size_t fully_labeled = 0;
  std::size_t consensus = 0;
  PhaseStatus status = PhaseStatus::open;

  nlohmann::ordered_json to_json() const;
};

class AnnotationService {
 public:
  // Replays the audit log of `store` (which must be writable for mutations).
  explicit AnnotationService(DatasetStore& store);

  static std::filesystem::path audit_path(const std::filesystem::path& store_dir);

  void set_clock(std::function<std::int64_t()> clock);

  void create_phase(const PhaseConfig& config);
  std::vector<PhaseView> phases() const;
  PhaseView phase(const std::string& id) const;

  // Samples still lacking this coder's (or their group's) verdict, in phase order.
  std::vector<Document> next_batch(const std::string& coder_id, const std::string& phase_id) const;
  AnnotationRecord submit_verdict(const std::string& coder_id, const std::string& post_id, Verdict verdict,
                                  const std::string& phase_id, std::optional<int> round = std::nullopt);
  // Fully-labeled samples with split verdicts. Resolved ones are omitted unless asked for.
  std::vector<DisagreementItem> disagreement_queue(const std::string& phase_id, bool include_resolved = false) const;
  // Fully-labeled unanimous samples.
  std::vector<std::string> unanimous(const std::string& phase_id) const;
  void record_consensus(const std::string& post_id, Verdict verdict, const std::string& phase_id,
                        bool override = false, const std::string& by = "moderator");
  AgreementReport agreement(const std::string& phase_id) const;
  Document document(const std::string& post_id) const { return store_.get_document(post_id); }

  std::vector<nlohmann::json> audit_events(std::optional<std::string> phase_id = std::nullopt) const;

  // Applies events to an empty state; used at construction and by tests.
  static std::map<std::string, PhaseView> replay(std::span<const nlohmann::json> events);

 private:
  void append(nlohmann::json event);
  static void apply(std::map<std::string, PhaseView>& state, const nlohmann::json& event);
  const PhaseView& find(const std::string& id) const;
  std::int64_t now() const;

  DatasetStore& store_;
  std::filesystem::path log_path_;
  mutable std::mutex mutex_;
  std::function<std::int64_t()> clock_;
  std::map<std::string, PhaseView> state_;
  std::vector<nlohmann::json> events_;
};

// Bearer tokens for the HTTP API.
struct TokenEntry {
  std::string coder;
  std::string token;
  bool moderator = false;
};

std::vector<TokenEntry> load_tokens(const std::filesystem::path& path);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> ui_dir;
};

// JSON API over an AnnotationService. listen() blocks until stop().
class AnnotationServer {
 public:
  AnnotationServer(AnnotationService& service, std::vector<TokenEntry> tokens, ServerOptions options);
  ~AnnotationServer();

  int bind();  // binds (port 0 picks a free port) and returns the port
  void serve();  // blocks
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

int http_status_for(ErrorCode code) noexcept;

}  // namespace ctn
