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

// Text embeddings from an external provider, cached in the dataset store, and
// cosine-similarity retrieval over them.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ctn/error.hpp"
#include "ctn/http.hpp"
#include "ctn/store.hpp"

namespace ctn {

// dot(a, b) / (|a| |b|). Throws undefined when either vector is zero and
// dimension when sizes differ.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) fail(ErrorCode::dimension, "cosine_similarity: dimension mismatch");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) fail(ErrorCode::undefined, "cosine_similarity: zero vector");
  const Scalar s = a.dot(b) / (na * nb);
  return std::clamp(s, Scalar(-1), Scalar(1));
}

// Cosine similarity of `query` against every row of `rows`.
template <typename DerivedQ, typename DerivedR>
Eigen::Matrix<typename DerivedQ::Scalar, Eigen::Dynamic, 1> cosine_similarities(
    const Eigen::MatrixBase<DerivedQ>& query, const Eigen::MatrixBase<DerivedR>& rows) {
  using Scalar = typename DerivedQ::Scalar;
  if (query.size() != rows.cols()) fail(ErrorCode::dimension, "cosine_similarities: dimension mismatch");
  const Scalar nq = query.norm();
  if (nq == Scalar(0)) fail(ErrorCode::undefined, "cosine_similarities: zero query vector");
  const auto norms = rows.rowwise().norm().eval();
  if ((norms.array() == Scalar(0)).any()) fail(ErrorCode::undefined, "cosine_similarities: zero candidate vector");
  const auto qcol = query.derived().reshaped().eval();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sims = (rows * qcol).array() / (norms.array() * nq);
  return sims.cwiseMax(Scalar(-1)).cwiseMin(Scalar(1));
}

struct Neighbor {
  std::string id;
  double similarity = 0.0;

  bool operator==(const Neighbor&) const = default;
};

struct NeighborSet {
  std::string query_id;
  std::vector<Neighbor> neighbors;  // similarity nonincreasing, ties by ascending id
};

// The n candidates most similar to `query`, never including `query_id`.
// Throws size when fewer than n candidates remain.
NeighborSet top_n_by_cosine(const std::string& query_id, const Eigen::Ref<const Eigen::RowVectorXd>& query,
                            std::span<const std::string> candidate_ids,
                            const Eigen::Ref<const Eigen::MatrixXd>& candidates, std::size_t n);

struct ExamplePool {
  std::vector<std::string> ids;
  Eigen::MatrixXd vectors;  // one row per id
};

struct ExampleSelection {
  std::vector<Neighbor> positive;
  std::vector<Neighbor> negative;
};

// Few-shot retrieval: the n most similar CT and the n most similar non-CT examples.
ExampleSelection select_examples(const std::string& query_id, const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                 std::size_t n, const ExamplePool& positive, const ExamplePool& negative);

// Provider side ---------------------------------------------------------------

struct EmbeddingResponse {
  std::string model;
  int dim = 0;
  Eigen::MatrixXd vectors;  // one row per input text
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbeddingResponse embed(std::span<const std::string> texts) = 0;
  virtual std::string name() const = 0;
};

// Deterministic pseudo-embeddings: signed feature hashing of lowercase word
// tokens, L2-normalized. Texts sharing vocabulary land close together.
class MockEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit MockEmbeddingProvider(int dim = 64, std::string model = "mock-hash-bow")
      : dim_(dim), model_(std::move(model)) {}

  EmbeddingResponse embed(std::span<const std::string> texts) override;
  std::string name() const override { return "mock"; }
  std::size_t calls() const noexcept { return calls_; }

  static Eigen::RowVectorXd embed_one(const std::string& text, int dim);

 private:
  int dim_;
  std::string model_;
  std::atomic<std::size_t> calls_{0};
};

// POST {base}/embed with {"texts": [...]}, expecting
// {"model": ..., "dim": ..., "vectors": [[...], ...]}.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(HttpEndpoint endpoint, RetryPolicy retry, std::string provider_name = "http",
                        std::string model = {})
      : endpoint_(std::move(endpoint)), retry_(retry), name_(std::move(provider_name)), model_(std::move(model)) {}

  EmbeddingResponse embed(std::span<const std::string> texts) override;
  std::string name() const override { return name_; }

 private:
  HttpEndpoint endpoint_;
  RetryPolicy retry_;
  std::string name_;
  std::string model_;
};

// Wire helpers shared with the mock HTTP server.
std::string encode_embed_request(std::span<const std::string> texts, const std::string& model);
std::vector<std::string> decode_embed_request(const std::string& body);
std::string encode_embed_response(const EmbeddingResponse& response);
EmbeddingResponse decode_embed_response(const std::string& body);

std::string embedding_fingerprint(const std::string& provider_name, const std::string& model, int dim);

struct EmbedOptions {
  std::size_t batch_size = 64;
  std::size_t parallel = 4;
};

struct EmbedReport {
  std::size_t requested = 0;
  std::size_t cached = 0;
  std::size_t embedded = 0;
  std::size_t provider_calls = 0;
  std::string fingerprint;
};

// Embeds every document not already cached under the store's fingerprint and
// text hash. Vectors are written to the store in input order.
EmbedReport embed_documents(DatasetStore& store, EmbeddingProvider& provider, std::span<const Document> docs,
                            const EmbedOptions& options = {});

}  // namespace ctn
