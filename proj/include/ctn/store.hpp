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

// Single-directory dataset store. Every entity type lives in its own
// newline-delimited JSON file; embeddings are a flat little-endian float64
// matrix plus a manifest. Writes append; compact() rewrites each file from the
// in-memory state. One writer per directory (enforced with a lock file), any
// number of readers.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "ctn/corpus.hpp"
#include "ctn/types.hpp"

namespace ctn {

enum class LabelOrigin : std::uint8_t { consensus, import };
enum class CodingPhase : std::uint8_t { pilot, consolidation, conclusion, external };

std::string_view to_string(LabelOrigin o) noexcept;
std::string_view to_string(CodingPhase p) noexcept;
std::optional<CodingPhase> parse_coding_phase(std::string_view s) noexcept;

struct LabeledSample {
  std::string post_id;
  Label label = Label::NonCT;
  LabelOrigin origin = LabelOrigin::import;
  CodingPhase phase = CodingPhase::external;

  bool operator==(const LabeledSample&) const = default;
};

struct SplitAssignment {
  std::string post_id;
  int fold = 0;

  bool operator==(const SplitAssignment&) const = default;
};

struct Split {
  std::string id;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<SplitAssignment> assignments;
};

struct PredictionRecord {
  std::string post_id;
  std::string model_id;
  std::optional<double> score;  // in [0, 1]
  std::optional<Label> label;   // hard label
  int run_index = 0;
  std::optional<std::string> raw_response;

  // Chat-model runs only.
  std::string status = "ok";  // ok | failed
  std::optional<std::string> verdict;  // Yes | No | Unparseable
  std::optional<std::string> justification;
  std::optional<std::string> error;
  int attempts = 0;
  std::optional<double> latency_ms;

  // Copied from the document so prediction files are self-contained.
  std::string subreddit;
  std::int64_t num_comments = 0;
  std::int64_t karma = 0;
};

struct DocumentFilter {
  std::set<std::string> subreddits;  // empty: any
  bool labeled_only = false;
  std::optional<std::set<std::string>> ids;
};

struct EmbeddingInfo {
  std::string fingerprint;
  int dim = 0;
};

class DatasetStore {
 public:
  enum class Mode { read_only, read_write };

  // Opens (and in read-write mode creates) the store at `dir`.
  static std::unique_ptr<DatasetStore> open(const std::filesystem::path& dir, Mode mode);

  ~DatasetStore();
  DatasetStore(const DatasetStore&) = delete;
  DatasetStore& operator=(const DatasetStore&) = delete;

  const std::filesystem::path& dir() const noexcept { return dir_; }
  bool writable() const noexcept { return mode_ == Mode::read_write; }

  // Documents ---------------------------------------------------------------
  // Re-putting an identical document is a no-op; a changed one replaces the
  // stored copy in place.
  void put_documents(std::span<const Document> docs);
  std::vector<Document> get_documents(const DocumentFilter& filter = {}) const;
  Document get_document(const std::string& id) const;
  bool has_document(const std::string& id) const;
  std::size_t document_count() const;

  // Labels: exactly one per post; a second put conflicts unless `override`.
  void put_label(const LabeledSample& sample, bool override = false);
  void put_labels(std::span<const LabeledSample> samples, bool override = false);
  std::vector<LabeledSample> labels() const;  // ordered by post_id
  std::optional<LabeledSample> label(const std::string& post_id) const;

  // Splits.
  void put_split(const Split& split, bool override = false);
  Split get_split(const std::string& id) const;
  std::vector<std::string> split_ids() const;

  // Embeddings. All rows share one fingerprint and dimension.
  std::optional<EmbeddingInfo> embedding_info() const;
  void put_embeddings(const EmbeddingInfo& info, std::span<const std::string> post_ids,
                      std::span<const std::string> text_hashes, const Eigen::MatrixXd& rows);
  bool has_embedding(const std::string& post_id, std::string_view text_hash = {}) const;
  std::vector<std::string> missing_embeddings(std::span<const std::string> post_ids) const;
  // Rows in the order of `post_ids`; missing ids throw integrity listing them.
  Eigen::MatrixXd embedding_matrix(std::span<const std::string> post_ids) const;

  // Predictions: last write wins per (post_id, model_id, run_index).
  void put_predictions(std::span<const PredictionRecord> records);
  std::vector<PredictionRecord> predictions(std::optional<std::string> model_id = std::nullopt) const;

  // Rewrites every record file from current state, dropping superseded lines.
  void compact();

 private:
  DatasetStore(std::filesystem::path dir, Mode mode);
  void load();
  void require_writable(const char* op) const;

  std::filesystem::path dir_;
  Mode mode_;
  int lock_fd_ = -1;
  mutable std::shared_mutex mutex_;

  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> doc_index_;
  std::map<std::string, LabeledSample> labels_;
  std::map<std::string, Split> splits_;

  std::optional<EmbeddingInfo> embedding_info_;
  std::unordered_map<std::string, std::size_t> embedding_row_;
  std::unordered_map<std::string, std::string> embedding_hash_;
  std::vector<std::string> embedding_ids_;  // row -> post_id
  std::vector<double> embedding_values_;    // row-major

  std::vector<PredictionRecord> predictions_;
  std::map<std::tuple<std::string, std::string, int>, std::size_t> prediction_index_;
};

// Standalone prediction files: the store's record format, one per line.
std::string prediction_line(const PredictionRecord& record);
PredictionRecord parse_prediction_line(std::string_view line);
void write_predictions_file(const std::filesystem::path& path, std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_predictions_file(const std::filesystem::path& path);

// Stable content hash (FNV-1a 64, hex) used to key embedding cache entries.
std::string text_hash(std::string_view text);

}  // namespace ctn
