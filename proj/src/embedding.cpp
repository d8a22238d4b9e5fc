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

#include "ctn/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <numeric>

#include <nlohmann/json.hpp>

namespace ctn {

using nlohmann::json;

NeighborSet top_n_by_cosine(const std::string& query_id, const Eigen::Ref<const Eigen::RowVectorXd>& query,
                            std::span<const std::string> candidate_ids,
                            const Eigen::Ref<const Eigen::MatrixXd>& candidates, std::size_t n) {
  if (static_cast<std::size_t>(candidates.rows()) != candidate_ids.size())
    fail(ErrorCode::dimension, "top_n_by_cosine: ids and vectors disagree in count");
  if (candidates.cols() != query.size()) fail(ErrorCode::dimension, "top_n_by_cosine: dimension mismatch");

  std::vector<Neighbor> scored;
  scored.reserve(candidate_ids.size());
  for (std::size_t i = 0; i < candidate_ids.size(); ++i) {
    if (candidate_ids[i] == query_id) continue;
    scored.push_back({candidate_ids[i], cosine_similarity(query, candidates.row(static_cast<Eigen::Index>(i)))});
  }
  if (scored.size() < n)
    fail(ErrorCode::size, "example pool has " + std::to_string(scored.size()) + " candidates, need " +
                              std::to_string(n));
  const auto better = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
  scored.resize(n);
  return {query_id, std::move(scored)};
}

ExampleSelection select_examples(const std::string& query_id, const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                 std::size_t n, const ExamplePool& positive, const ExamplePool& negative) {
  ExampleSelection out;
  if (n == 0) return out;
  out.positive = top_n_by_cosine(query_id, query, positive.ids, positive.vectors, n).neighbors;
  out.negative = top_n_by_cosine(query_id, query, negative.ids, negative.vectors, n).neighbors;
  return out;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Eigen::RowVectorXd MockEmbeddingProvider::embed_one(const std::string& text, int dim) {
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(dim);
  std::string token;
  const auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = fnv1a(token);
    v(static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim))) += (h >> 63) ? -1.0 : 1.0;
    token.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  if (v.isZero()) v(static_cast<Eigen::Index>(fnv1a(text) % static_cast<std::uint64_t>(dim))) = 1.0;
  return v / v.norm();
}

EmbeddingResponse MockEmbeddingProvider::embed(std::span<const std::string> texts) {
  ++calls_;
  EmbeddingResponse r;
  r.model = model_;
  r.dim = dim_;
  r.vectors.resize(static_cast<Eigen::Index>(texts.size()), dim_);
  for (std::size_t i = 0; i < texts.size(); ++i) r.vectors.row(static_cast<Eigen::Index>(i)) = embed_one(texts[i], dim_);
  return r;
}

std::string encode_embed_request(std::span<const std::string> texts, const std::string& model) {
  json j{{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  if (!model.empty()) j["model"] = model;
  return j.dump();
}

std::vector<std::string> decode_embed_request(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("texts") || !j["texts"].is_array())
    fail(ErrorCode::parse, "embed request must be {\"texts\": [...]}");
  return j["texts"].get<std::vector<std::string>>();
}

std::string encode_embed_response(const EmbeddingResponse& response) {
  json vectors = json::array();
  for (Eigen::Index i = 0; i < response.vectors.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < response.vectors.cols(); ++c) row.push_back(response.vectors(i, c));
    vectors.push_back(std::move(row));
  }
  return json{{"model", response.model}, {"dim", response.dim}, {"vectors", std::move(vectors)}}.dump();
}

EmbeddingResponse decode_embed_response(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorCode::parse, "embed response is not a JSON object");
  EmbeddingResponse r;
  try {
    r.model = j.at("model").get<std::string>();
    r.dim = j.at("dim").get<int>();
    const auto& vectors = j.at("vectors");
    r.vectors.resize(static_cast<Eigen::Index>(vectors.size()), r.dim);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      const auto& row = vectors[i];
      if (!row.is_array() || static_cast<int>(row.size()) != r.dim)
        fail(ErrorCode::integrity, "embed response row " + std::to_string(i) + " does not have dim " +
                                       std::to_string(r.dim));
      for (int c = 0; c < r.dim; ++c) r.vectors(static_cast<Eigen::Index>(i), c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("embed response: ") + e.what());
  }
  return r;
}

EmbeddingResponse HttpEmbeddingProvider::embed(std::span<const std::string> texts) {
  const auto result = post_json(endpoint_, "/embed", encode_embed_request(texts, model_), retry_);
  if (result.status != 200)
    fail(ErrorCode::transport, "embedding provider returned HTTP " + std::to_string(result.status) + ": " +
                                   result.body.substr(0, 200));
  return decode_embed_response(result.body);
}

std::string embedding_fingerprint(const std::string& provider_name, const std::string& model, int dim) {
  return provider_name + "/" + model + "/" + std::to_string(dim);
}

EmbedReport embed_documents(DatasetStore& store, EmbeddingProvider& provider, std::span<const Document> docs,
                            const EmbedOptions& options) {
  EmbedReport report;
  report.requested = docs.size();
  const auto info = store.embedding_info();
  if (info) report.fingerprint = info->fingerprint;

  std::vector<std::size_t> todo;
  std::vector<std::string> hashes(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    hashes[i] = text_hash(docs[i].text);
    if (info && store.has_embedding(docs[i].post_id, hashes[i])) {
      ++report.cached;
    } else {
      todo.push_back(i);
    }
  }

  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t width = std::max<std::size_t>(1, options.parallel);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t s = 0; s < todo.size(); s += batch)
    batches.emplace_back(todo.begin() + static_cast<std::ptrdiff_t>(s),
                         todo.begin() + static_cast<std::ptrdiff_t>(std::min(todo.size(), s + batch)));

  for (std::size_t wave = 0; wave < batches.size(); wave += width) {
    const std::size_t end = std::min(batches.size(), wave + width);
    std::vector<std::future<EmbeddingResponse>> inflight;
    for (std::size_t b = wave; b < end; ++b) {
      inflight.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred, [&, b] {
        std::vector<std::string> texts;
        for (auto i : batches[b]) texts.push_back(docs[i].text);
        return provider.embed(texts);
      }));
    }
    for (std::size_t b = wave; b < end; ++b) {
      EmbeddingResponse resp = inflight[b - wave].get();
      ++report.provider_calls;
      const auto& idx = batches[b];
      if (static_cast<std::size_t>(resp.vectors.rows()) != idx.size())
        fail(ErrorCode::integrity, "provider returned " + std::to_string(resp.vectors.rows()) + " vectors for " +
                                       std::to_string(idx.size()) + " texts");
      if (resp.vectors.cols() != resp.dim) fail(ErrorCode::integrity, "provider vectors disagree with declared dim");
      EmbeddingInfo got{embedding_fingerprint(provider.name(), resp.model, resp.dim), resp.dim};
      std::vector<std::string> ids, hs;
      for (auto i : idx) {
        ids.push_back(docs[i].post_id);
        hs.push_back(hashes[i]);
      }
      store.put_embeddings(got, ids, hs, resp.vectors);
      report.embedded += idx.size();
      report.fingerprint = got.fingerprint;
    }
  }
  return report;
}

}  // namespace ctn
