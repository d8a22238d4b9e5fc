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

#include "ctn/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctn/error.hpp"

namespace ctn {

using nlohmann::json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "embedding blobs are little-endian float64");

namespace {

constexpr const char* kIndexFile = "index.json";
constexpr const char* kDocumentsFile = "documents.ndjson";
constexpr const char* kLabelsFile = "labels.ndjson";
constexpr const char* kSplitsFile = "splits.ndjson";
constexpr const char* kEmbeddingsBlob = "embeddings.bin";
constexpr const char* kEmbeddingsManifest = "embeddings.ndjson";
constexpr const char* kPredictionsFile = "predictions.ndjson";
constexpr int kFormatVersion = 1;

template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      fail(ErrorCode::integrity, path.filename().string() + ":" + std::to_string(lineno) + ": corrupt record");
    fn(j);
  }
}

void append_lines(const fs::path& path, const std::string& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) fail(ErrorCode::io, "cannot append to " + path.string());
  out << lines;
  out.flush();
  if (!out) fail(ErrorCode::io, "write failed on " + path.string());
}

void replace_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) fail(ErrorCode::io, "write failed on " + tmp.string());
  }
  fs::rename(tmp, path);
}

json to_json(const Document& d) {
  return json{{"post_id", d.post_id},         {"subreddit", d.subreddit},       {"text", d.text},
              {"char_len", d.char_len},       {"num_comments", d.num_comments}, {"karma", d.karma},
              {"created_utc", d.created_utc}};
}

Document document_from_json(const json& j) {
  Document d;
  d.post_id = j.at("post_id").get<std::string>();
  d.subreddit = j.at("subreddit").get<std::string>();
  d.text = j.at("text").get<std::string>();
  d.char_len = j.at("char_len").get<std::size_t>();
  d.num_comments = j.value("num_comments", std::int64_t{0});
  d.karma = j.value("karma", std::int64_t{0});
  d.created_utc = j.value("created_utc", std::int64_t{0});
  return d;
}

json to_json(const LabeledSample& s) {
  return json{{"post_id", s.post_id},
              {"label", to_string(s.label)},
              {"origin", to_string(s.origin)},
              {"phase", to_string(s.phase)}};
}

LabeledSample label_from_json(const json& j) {
  LabeledSample s;
  s.post_id = j.at("post_id").get<std::string>();
  const auto label = parse_label(j.at("label").get<std::string>());
  if (!label) fail(ErrorCode::integrity, "labels: bad label for " + s.post_id);
  s.label = *label;
  s.origin = j.value("origin", std::string("import")) == "consensus" ? LabelOrigin::consensus : LabelOrigin::import;
  s.phase = parse_coding_phase(j.value("phase", std::string("external"))).value_or(CodingPhase::external);
  return s;
}

json to_json(const PredictionRecord& r) {
  json j{{"post_id", r.post_id}, {"model_id", r.model_id}, {"run_index", r.run_index}};
  j["score"] = r.score ? json(*r.score) : json(nullptr);
  j["label"] = r.label ? json(to_string(*r.label)) : json(nullptr);
  if (r.raw_response) j["raw_response"] = *r.raw_response;
  if (r.status != "ok") j["status"] = r.status;
  if (r.verdict) j["verdict"] = *r.verdict;
  if (r.justification) j["justification"] = *r.justification;
  if (r.error) j["error"] = *r.error;
  if (r.attempts) j["attempts"] = r.attempts;
  if (r.latency_ms) j["latency_ms"] = *r.latency_ms;
  if (!r.subreddit.empty()) j["subreddit"] = r.subreddit;
  j["num_comments"] = r.num_comments;
  j["karma"] = r.karma;
  return j;
}

PredictionRecord prediction_from_json(const json& j) {
  PredictionRecord r;
  r.post_id = j.at("post_id").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.run_index = j.value("run_index", 0);
  if (j.contains("score") && j["score"].is_number()) r.score = j["score"].get<double>();
  if (j.contains("label") && j["label"].is_string()) r.label = parse_label(j["label"].get<std::string>());
  if (j.contains("raw_response")) r.raw_response = j["raw_response"].get<std::string>();
  r.status = j.value("status", std::string("ok"));
  if (j.contains("verdict")) r.verdict = j["verdict"].get<std::string>();
  if (j.contains("justification")) r.justification = j["justification"].get<std::string>();
  if (j.contains("error")) r.error = j["error"].get<std::string>();
  r.attempts = j.value("attempts", 0);
  if (j.contains("latency_ms")) r.latency_ms = j["latency_ms"].get<double>();
  r.subreddit = j.value("subreddit", std::string());
  r.num_comments = j.value("num_comments", std::int64_t{0});
  r.karma = j.value("karma", std::int64_t{0});
  return r;
}

void validate_prediction(const PredictionRecord& r) {
  if (r.run_index < 0) fail(ErrorCode::domain, "prediction run_index must be >= 0");
  if (r.score && !(*r.score >= 0.0 && *r.score <= 1.0))
    fail(ErrorCode::domain, "prediction score outside [0,1] for " + r.post_id);
}

}  // namespace

std::string_view to_string(LabelOrigin o) noexcept { return o == LabelOrigin::consensus ? "consensus" : "import"; }

std::string_view to_string(CodingPhase p) noexcept {
  switch (p) {
    case CodingPhase::pilot: return "pilot";
    case CodingPhase::consolidation: return "consolidation";
    case CodingPhase::conclusion: return "conclusion";
    case CodingPhase::external: return "external";
  }
  return "external";
}

std::optional<CodingPhase> parse_coding_phase(std::string_view s) noexcept {
  if (s == "pilot") return CodingPhase::pilot;
  if (s == "consolidation") return CodingPhase::consolidation;
  if (s == "conclusion") return CodingPhase::conclusion;
  if (s == "external") return CodingPhase::external;
  return std::nullopt;
}

std::string text_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

DatasetStore::DatasetStore(fs::path dir, Mode mode) : dir_(std::move(dir)), mode_(mode) {}

DatasetStore::~DatasetStore() {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

std::unique_ptr<DatasetStore> DatasetStore::open(const fs::path& dir, Mode mode) {
  std::unique_ptr<DatasetStore> store(new DatasetStore(dir, mode));
  const fs::path index = dir / kIndexFile;
  if (mode == Mode::read_write) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::io, "cannot create store directory " + dir.string() + ": " + ec.message());
    store->lock_fd_ = ::open((dir / ".lock").c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (store->lock_fd_ < 0) fail(ErrorCode::io, "cannot create lock file in " + dir.string());
    if (::flock(store->lock_fd_, LOCK_EX | LOCK_NB) != 0)
      fail(ErrorCode::permission, "store " + dir.string() + " is locked by another writer");
    if (!fs::exists(index)) {
      replace_file(index, json{{"format", "ctnarr-store"}, {"version", kFormatVersion}}.dump(2) + "\n");
    }
  } else if (!fs::exists(index)) {
    fail(ErrorCode::not_found, "no store at " + dir.string());
  }
  store->load();
  return store;
}

void DatasetStore::require_writable(const char* op) const {
  if (mode_ != Mode::read_write) fail(ErrorCode::permission, std::string(op) + ": store opened read-only");
}

void DatasetStore::load() {
  std::ifstream idx(dir_ / kIndexFile);
  json index = json::parse(idx, nullptr, false);
  if (index.is_discarded() || index.value("format", "") != "ctnarr-store")
    fail(ErrorCode::integrity, "bad store index in " + dir_.string());
  if (index.value("version", 0) > kFormatVersion) fail(ErrorCode::integrity, "store format too new");
  if (index.contains("embedding")) {
    embedding_info_ = EmbeddingInfo{index["embedding"].at("fingerprint").get<std::string>(),
                                    index["embedding"].at("dim").get<int>()};
  }

  for_each_line(dir_ / kDocumentsFile, [&](const json& j) {
    Document d = document_from_json(j);
    const auto it = doc_index_.find(d.post_id);
    if (it != doc_index_.end()) {
      documents_[it->second] = std::move(d);
    } else {
      doc_index_.emplace(d.post_id, documents_.size());
      documents_.push_back(std::move(d));
    }
  });
  for_each_line(dir_ / kLabelsFile, [&](const json& j) {
    auto s = label_from_json(j);
    labels_[s.post_id] = s;
  });
  for_each_line(dir_ / kSplitsFile, [&](const json& j) {
    const auto id = j.at("split_id").get<std::string>();
    if (j.value("reset", false)) {
      splits_.erase(id);
      return;
    }
    auto& s = splits_[id];
    s.id = id;
    s.k = j.at("k").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.assignments.push_back({j.at("post_id").get<std::string>(), j.at("fold").get<int>()});
  });

  if (embedding_info_) {
    const auto dim = static_cast<std::size_t>(embedding_info_->dim);
    std::ifstream blob(dir_ / kEmbeddingsBlob, std::ios::binary);
    std::size_t rows = 0;
    for_each_line(dir_ / kEmbeddingsManifest, [&](const json& j) {
      const auto id = j.at("post_id").get<std::string>();
      const auto row = j.at("row").get<std::size_t>();
      if (row != rows) fail(ErrorCode::integrity, "embeddings manifest rows out of sequence");
      ++rows;
      embedding_ids_.push_back(id);
      embedding_row_[id] = row;
      embedding_hash_[id] = j.value("text_hash", std::string());
    });
    embedding_values_.resize(rows * dim);
    if (rows > 0) {
      blob.read(reinterpret_cast<char*>(embedding_values_.data()),
                static_cast<std::streamsize>(embedding_values_.size() * sizeof(double)));
      if (static_cast<std::size_t>(blob.gcount()) != embedding_values_.size() * sizeof(double))
        fail(ErrorCode::integrity, "embeddings.bin shorter than its manifest");
    }
  }

  for_each_line(dir_ / kPredictionsFile, [&](const json& j) {
    auto r = prediction_from_json(j);
    auto key = std::make_tuple(r.post_id, r.model_id, r.run_index);
    const auto it = prediction_index_.find(key);
    if (it != prediction_index_.end()) {
      predictions_[it->second] = std::move(r);
    } else {
      prediction_index_.emplace(std::move(key), predictions_.size());
      predictions_.push_back(std::move(r));
    }
  });
}

void DatasetStore::put_documents(std::span<const Document> docs) {
  require_writable("put_documents");
  std::unique_lock lock(mutex_);
  std::string lines;
  for (const auto& d : docs) {
    if (d.post_id.empty()) fail(ErrorCode::domain, "document without post_id");
    const auto it = doc_index_.find(d.post_id);
    if (it != doc_index_.end()) {
      if (documents_[it->second] == d) continue;
      documents_[it->second] = d;
    } else {
      doc_index_.emplace(d.post_id, documents_.size());
      documents_.push_back(d);
    }
    lines += to_json(d).dump() + "\n";
  }
  if (!lines.empty()) append_lines(dir_ / kDocumentsFile, lines);
}

std::vector<Document> DatasetStore::get_documents(const DocumentFilter& filter) const {
  std::shared_lock lock(mutex_);
  std::vector<Document> out;
  for (const auto& d : documents_) {
    if (!filter.subreddits.empty() && !filter.subreddits.count(d.subreddit)) continue;
    if (filter.labeled_only && !labels_.count(d.post_id)) continue;
    if (filter.ids && !filter.ids->count(d.post_id)) continue;
    out.push_back(d);
  }
  return out;
}

Document DatasetStore::get_document(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = doc_index_.find(id);
  if (it == doc_index_.end()) fail(ErrorCode::not_found, "unknown document " + id);
  return documents_[it->second];
}

bool DatasetStore::has_document(const std::string& id) const {
  std::shared_lock lock(mutex_);
  return doc_index_.count(id) > 0;
}

std::size_t DatasetStore::document_count() const {
  std::shared_lock lock(mutex_);
  return documents_.size();
}

void DatasetStore::put_label(const LabeledSample& sample, bool override) {
  put_labels(std::span<const LabeledSample>(&sample, 1), override);
}

void DatasetStore::put_labels(std::span<const LabeledSample> samples, bool override) {
  require_writable("put_label");
  std::unique_lock lock(mutex_);
  std::set<std::string> batch;
  for (const auto& s : samples) {
    if (s.post_id.empty()) fail(ErrorCode::domain, "label without post_id");
    if (!batch.insert(s.post_id).second) fail(ErrorCode::conflict, "duplicate label in batch for " + s.post_id);
    const auto it = labels_.find(s.post_id);
    if (it != labels_.end() && !override && !(it->second == s))
      fail(ErrorCode::conflict, "label already recorded for " + s.post_id);
  }
  std::string lines;
  for (const auto& s : samples) {
    const auto it = labels_.find(s.post_id);
    if (it != labels_.end() && it->second == s) continue;
    labels_[s.post_id] = s;
    lines += to_json(s).dump() + "\n";
  }
  if (!lines.empty()) append_lines(dir_ / kLabelsFile, lines);
}

std::vector<LabeledSample> DatasetStore::labels() const {
  std::shared_lock lock(mutex_);
  std::vector<LabeledSample> out;
  out.reserve(labels_.size());
  for (const auto& [id, s] : labels_) out.push_back(s);
  return out;
}

std::optional<LabeledSample> DatasetStore::label(const std::string& post_id) const {
  std::shared_lock lock(mutex_);
  const auto it = labels_.find(post_id);
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

void DatasetStore::put_split(const Split& split, bool override) {
  require_writable("put_split");
  if (split.id.empty()) fail(ErrorCode::domain, "split without id");
  std::unique_lock lock(mutex_);
  const bool exists = splits_.count(split.id) > 0;
  if (exists && !override) fail(ErrorCode::conflict, "split " + split.id + " already exists");
  std::string lines;
  if (exists) lines += json{{"split_id", split.id}, {"reset", true}}.dump() + "\n";
  for (const auto& a : split.assignments)
    lines += json{{"split_id", split.id}, {"post_id", a.post_id}, {"fold", a.fold}, {"k", split.k},
                  {"seed", split.seed}}
                 .dump() +
             "\n";
  splits_[split.id] = split;
  append_lines(dir_ / kSplitsFile, lines);
}

Split DatasetStore::get_split(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = splits_.find(id);
  if (it == splits_.end()) fail(ErrorCode::not_found, "unknown split " + id);
  return it->second;
}

std::vector<std::string> DatasetStore::split_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : splits_) out.push_back(id);
  return out;
}

std::optional<EmbeddingInfo> DatasetStore::embedding_info() const {
  std::shared_lock lock(mutex_);
  return embedding_info_;
}

void DatasetStore::put_embeddings(const EmbeddingInfo& info, std::span<const std::string> post_ids,
                                  std::span<const std::string> text_hashes, const Eigen::MatrixXd& rows) {
  require_writable("put_embeddings");
  if (static_cast<std::size_t>(rows.rows()) != post_ids.size() || text_hashes.size() != post_ids.size())
    fail(ErrorCode::dimension, "put_embeddings: ids, hashes and rows disagree in count");
  if (rows.cols() != info.dim)
    fail(ErrorCode::integrity, "put_embeddings: vectors have dim " + std::to_string(rows.cols()) +
                                   " but fingerprint says " + std::to_string(info.dim));
  if (!rows.allFinite()) fail(ErrorCode::integrity, "put_embeddings: non-finite embedding values");
  std::unique_lock lock(mutex_);
  if (embedding_info_ && (embedding_info_->fingerprint != info.fingerprint || embedding_info_->dim != info.dim))
    fail(ErrorCode::integrity, "embedding fingerprint " + info.fingerprint + "/" + std::to_string(info.dim) +
                                   " does not match store " + embedding_info_->fingerprint + "/" +
                                   std::to_string(embedding_info_->dim));
  if (!embedding_info_) {
    embedding_info_ = info;
    std::ifstream idx(dir_ / kIndexFile);
    json index = json::parse(idx);
    index["embedding"] = {{"fingerprint", info.fingerprint}, {"dim", info.dim}};
    replace_file(dir_ / kIndexFile, index.dump(2) + "\n");
  }
  const auto dim = static_cast<std::size_t>(info.dim);
  std::string manifest;
  std::string blob;
  blob.reserve(post_ids.size() * dim * sizeof(double));
  for (std::size_t i = 0; i < post_ids.size(); ++i) {
    const std::size_t row = embedding_ids_.size();
    embedding_ids_.push_back(post_ids[i]);
    embedding_row_[post_ids[i]] = row;
    embedding_hash_[post_ids[i]] = text_hashes[i];
    for (std::size_t c = 0; c < dim; ++c) {
      const double v = rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      embedding_values_.push_back(v);
      blob.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
    manifest += json{{"post_id", post_ids[i]}, {"row", row}, {"text_hash", text_hashes[i]}}.dump() + "\n";
  }
  append_lines(dir_ / kEmbeddingsBlob, blob);
  append_lines(dir_ / kEmbeddingsManifest, manifest);
}

bool DatasetStore::has_embedding(const std::string& post_id, std::string_view hash) const {
  std::shared_lock lock(mutex_);
  const auto it = embedding_hash_.find(post_id);
  if (it == embedding_hash_.end()) return false;
  return hash.empty() || it->second == hash;
}

std::vector<std::string> DatasetStore::missing_embeddings(std::span<const std::string> post_ids) const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& id : post_ids)
    if (!embedding_row_.count(id)) out.push_back(id);
  return out;
}

Eigen::MatrixXd DatasetStore::embedding_matrix(std::span<const std::string> post_ids) const {
  const auto missing = missing_embeddings(post_ids);
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? "," : "") + missing[i];
    if (missing.size() > 20) list += ",...";
    fail(ErrorCode::integrity, std::to_string(missing.size()) + " documents lack embeddings: " + list);
  }
  std::shared_lock lock(mutex_);
  const auto dim = static_cast<Eigen::Index>(embedding_info_->dim);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(post_ids.size()), dim);
  for (std::size_t i = 0; i < post_ids.size(); ++i) {
    const std::size_t row = embedding_row_.at(post_ids[i]);
    out.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(embedding_values_.data() + row * static_cast<std::size_t>(dim), dim);
  }
  return out;
}

void DatasetStore::put_predictions(std::span<const PredictionRecord> records) {
  require_writable("put_predictions");
  for (const auto& r : records) validate_prediction(r);
  std::unique_lock lock(mutex_);
  std::string lines;
  for (const auto& r : records) {
    auto key = std::make_tuple(r.post_id, r.model_id, r.run_index);
    const auto it = prediction_index_.find(key);
    if (it != prediction_index_.end()) {
      predictions_[it->second] = r;
    } else {
      prediction_index_.emplace(std::move(key), predictions_.size());
      predictions_.push_back(r);
    }
    lines += to_json(r).dump() + "\n";
  }
  if (!lines.empty()) append_lines(dir_ / kPredictionsFile, lines);
}

std::vector<PredictionRecord> DatasetStore::predictions(std::optional<std::string> model_id) const {
  std::shared_lock lock(mutex_);
  std::vector<PredictionRecord> out;
  for (const auto& r : predictions_)
    if (!model_id || r.model_id == *model_id) out.push_back(r);
  return out;
}

void DatasetStore::compact() {
  require_writable("compact");
  std::unique_lock lock(mutex_);
  std::string buf;
  for (const auto& d : documents_) buf += to_json(d).dump() + "\n";
  replace_file(dir_ / kDocumentsFile, buf);

  buf.clear();
  for (const auto& [id, s] : labels_) buf += to_json(s).dump() + "\n";
  replace_file(dir_ / kLabelsFile, buf);

  buf.clear();
  for (const auto& [id, split] : splits_)
    for (const auto& a : split.assignments)
      buf += json{{"split_id", id}, {"post_id", a.post_id}, {"fold", a.fold}, {"k", split.k}, {"seed", split.seed}}
                 .dump() +
             "\n";
  replace_file(dir_ / kSplitsFile, buf);

  buf.clear();
  for (const auto& r : predictions_) buf += to_json(r).dump() + "\n";
  replace_file(dir_ / kPredictionsFile, buf);

  if (embedding_info_) {
    // Keep only the live row of every post, in first-embedded order.
    const auto dim = static_cast<std::size_t>(embedding_info_->dim);
    std::vector<std::string> ids;
    std::vector<double> values;
    std::unordered_map<std::string, std::size_t> rows;
    std::string manifest;
    for (std::size_t r = 0; r < embedding_ids_.size(); ++r) {
      const auto& id = embedding_ids_[r];
      if (rows.count(id)) continue;
      const std::size_t live = embedding_row_.at(id);
      rows[id] = ids.size();
      manifest += json{{"post_id", id}, {"row", ids.size()}, {"text_hash", embedding_hash_.at(id)}}.dump() + "\n";
      ids.push_back(id);
      values.insert(values.end(), embedding_values_.begin() + static_cast<std::ptrdiff_t>(live * dim),
                    embedding_values_.begin() + static_cast<std::ptrdiff_t>((live + 1) * dim));
    }
    replace_file(dir_ / kEmbeddingsBlob,
                 std::string(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double)));
    replace_file(dir_ / kEmbeddingsManifest, manifest);
    embedding_ids_ = std::move(ids);
    embedding_values_ = std::move(values);
    embedding_row_ = std::move(rows);
  }
}

std::string prediction_line(const PredictionRecord& record) { return to_json(record).dump(); }

PredictionRecord parse_prediction_line(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorCode::parse, "prediction line is not a JSON object");
  try {
    return prediction_from_json(j);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("prediction line: ") + e.what());
  }
}

void write_predictions_file(const fs::path& path, std::span<const PredictionRecord> records) {
  std::string out;
  for (const auto& r : records) out += prediction_line(r) + "\n";
  replace_file(path, out);
}

std::vector<PredictionRecord> read_predictions_file(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::not_found, "no predictions file " + path.string());
  std::vector<PredictionRecord> out;
  for_each_line(path, [&](const json& j) { out.push_back(prediction_from_json(j)); });
  return out;
}

}  // namespace ctn
