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


#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ctn/embedding.hpp"
#include "ctn/error.hpp"
#include "ctn/mock_server.hpp"
#include "ctn/random.hpp"
#include "support.hpp"

using namespace ctn;
using ctn::testing::TempDir;

namespace {

// Brute force: every candidate's cosine in long double, full sort, first n.
std::vector<Neighbor> brute_top_n(const std::string& qid, const Eigen::RowVectorXd& q, const std::vector<std::string>& ids,
                                  const Eigen::MatrixXd& rows, std::size_t n) {
  std::vector<std::pair<long double, std::string>> all;
  long double qq = 0;
  for (Eigen::Index j = 0; j < q.size(); ++j) qq += static_cast<long double>(q(j)) * q(j);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == qid) continue;
    long double dot = 0, rr = 0;
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      dot += static_cast<long double>(rows(static_cast<Eigen::Index>(i), j)) * q(j);
      rr += static_cast<long double>(rows(static_cast<Eigen::Index>(i), j)) * rows(static_cast<Eigen::Index>(i), j);
    }
    all.push_back({dot / (std::sqrt(qq) * std::sqrt(rr)), ids[i]});
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<Neighbor> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({all[i].second, static_cast<double>(all[i].first)});
  return out;
}

}  // namespace

TEST_CASE("cosine similarity basics") {
  Eigen::Vector3d a(1, 0, 0), b(0, 1, 0), c(2, 0, 0);
  CHECK(cosine_similarity(a, b) == 0.0);
  CHECK(cosine_similarity(a, c) == 1.0);
  CHECK(cosine_similarity(a, -c) == -1.0);
  CHECK_THROWS_AS(cosine_similarity(a, Eigen::Vector3d::Zero()), Error);
  CHECK_THROWS_AS(cosine_similarity(Eigen::VectorXd(a), Eigen::VectorXd(Eigen::Vector2d(1, 0))), Error);
  Eigen::Vector3f af(1, 1, 0), bf(1, 0, 0);
  CHECK(cosine_similarity(af, bf) == doctest::Approx(std::sqrt(0.5f)));
}

TEST_CASE("top-n by cosine equals exhaustive ranking") {
  Rng rng(202);
  for (int t = 0; t < 500; ++t) {
    const int dim = 2 + static_cast<int>(rng.bounded(8));
    const std::size_t m = 3 + rng.bounded(40);
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(m), dim);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      if (i >= 2 && rng.bounded(4) == 0) {
        // exact duplicate or power-of-two multiple of an earlier row: an exact tie
        const auto src = static_cast<Eigen::Index>(rng.bounded(i));
        rows.row(r) = rows.row(src) * (rng.bounded(2) ? 2.0 : 1.0);
      } else {
        for (int j = 0; j < dim; ++j) rows(r, j) = rng.uniform() * 2 - 1;
      }
      ids.push_back("c" + std::to_string(rng.bounded(1000)) + "_" + std::to_string(i));
    }
    Eigen::RowVectorXd q(dim);
    for (int j = 0; j < dim; ++j) q(j) = rng.uniform() * 2 - 1;
    // sometimes the query is itself in the pool
    std::string qid = "query";
    if (rng.bounded(2)) {
      const auto k = rng.bounded(m);
      qid = ids[k];
      q = rows.row(static_cast<Eigen::Index>(k));
    }
    const std::size_t available = m - static_cast<std::size_t>(std::count(ids.begin(), ids.end(), qid));
    const std::size_t n = 1 + rng.bounded(available);
    const auto got = top_n_by_cosine(qid, q, ids, rows, n);
    const auto want = brute_top_n(qid, q, ids, rows, n);
    REQUIRE(got.neighbors.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(got.neighbors[i].id == want[i].id);
      CHECK(std::abs(got.neighbors[i].similarity - want[i].similarity) < 1e-12);
    }
  }
}

TEST_CASE("top-n shortfall and example selection") {
  Eigen::MatrixXd rows(3, 2);
  rows << 1, 0, 0, 1, 1, 1;
  const std::vector<std::string> ids{"a", "b", "c"};
  CHECK_THROWS_AS(top_n_by_cosine("a", rows.row(0), ids, rows, 3), Error);
  const auto r = top_n_by_cosine("a", rows.row(0), ids, rows, 2);
  CHECK(r.neighbors[0].id == "c");
  CHECK(r.neighbors[1].id == "b");

  ExamplePool pos{{"p1", "p2"}, Eigen::MatrixXd(2, 2)}, neg{{"n1", "n2", "n3"}, Eigen::MatrixXd(3, 2)};
  pos.vectors << 1, 0, 0, 1;
  neg.vectors << 1, 0.1, -1, 0, 0.5, 0.5;
  const Eigen::RowVectorXd q = Eigen::RowVector2d(1, 0);
  const auto sel = select_examples("q", q, 1, pos, neg);
  REQUIRE(sel.positive.size() == 1);
  CHECK(sel.positive[0].id == "p1");
  CHECK(sel.negative[0].id == "n1");
}

TEST_CASE("mock embeddings are deterministic unit vectors") {
  MockEmbeddingProvider p(32);
  const std::vector<std::string> texts{"The Secret plan", "the secret PLAN", "garden birds"};
  const auto r = p.embed(texts);
  CHECK(r.dim == 32);
  CHECK(r.vectors.rows() == 3);
  for (int i = 0; i < 3; ++i) CHECK(r.vectors.row(i).norm() == doctest::Approx(1.0));
  CHECK(r.vectors.row(0) == r.vectors.row(1));
  CHECK(r.vectors.row(0) != r.vectors.row(2));
  CHECK(MockEmbeddingProvider::embed_one("x y", 32) == MockEmbeddingProvider::embed_one("x y", 32));
}

TEST_CASE("embed_documents caches by text hash") {
  TempDir dir("embcache");
  auto store = DatasetStore::open(dir.path(), DatasetStore::Mode::read_write);
  std::vector<Document> docs;
  for (int i = 0; i < 10; ++i) {
    Document d;
    d.post_id = "d" + std::to_string(i);
    d.subreddit = "s";
    d.text = "document number " + std::to_string(i) + " with some words";
    docs.push_back(d);
  }
  store->put_documents(docs);
  MockEmbeddingProvider p(16);
  EmbedOptions o;
  o.batch_size = 3;
  auto rep = embed_documents(*store, p, docs, o);
  CHECK(rep.embedded == 10);
  CHECK(rep.provider_calls == 4);
  CHECK(rep.fingerprint == "mock/mock-hash-bow/16");
  rep = embed_documents(*store, p, docs, o);
  CHECK(rep.embedded == 0);
  CHECK(rep.cached == 10);
  docs[4].text = "changed text";
  store->put_documents(std::vector<Document>{docs[4]});
  rep = embed_documents(*store, p, docs, o);
  CHECK(rep.embedded == 1);
  const auto m = store->embedding_matrix(std::vector<std::string>{"d4"});
  CHECK((m.row(0) - MockEmbeddingProvider::embed_one("changed text", 16)).norm() == 0.0);

  MockEmbeddingProvider other(8);
  Document extra;
  extra.post_id = "d10";
  extra.subreddit = "s";
  extra.text = "a brand new document";
  store->put_documents(std::vector<Document>{extra});
  CHECK_THROWS_AS(embed_documents(*store, other, std::vector<Document>{extra}, o), Error);
}

TEST_CASE("wire format round trip") {
  const std::vector<std::string> texts{"a", "b \"quoted\""};
  CHECK(decode_embed_request(encode_embed_request(texts, "m")) == texts);
  EmbeddingResponse r;
  r.model = "m";
  r.dim = 2;
  r.vectors = Eigen::MatrixXd(2, 2);
  r.vectors << 0.1, 0.2, 1.0 / 3.0, -4;
  const auto back = decode_embed_response(encode_embed_response(r));
  CHECK(back.vectors == r.vectors);
  CHECK(back.model == "m");
}

TEST_CASE("http embedding provider retries 429 then succeeds") {
  std::vector<double> slept;
  set_retry_sleeper([&](double ms) { slept.push_back(ms); });
  MockServerOptions so;
  so.fail_first = 2;
  so.fail_status = 429;
  so.embed_dim = 8;
  MockProviderServer server(so);
  const int port = server.start();
  HttpEndpoint ep;
  ep.base_url = "http://127.0.0.1:" + std::to_string(port);
  HttpEmbeddingProvider p(ep, RetryPolicy{}, "http", "mock-hash-bow");
  const std::vector<std::string> texts{"hello world"};
  const auto r = p.embed(texts);
  CHECK(server.requests() == 3);
  CHECK(slept.size() == 2);
  CHECK((r.vectors.row(0) - MockEmbeddingProvider::embed_one("hello world", 8)).norm() == 0.0);
  server.stop();
  set_retry_sleeper(nullptr);
}

TEST_CASE("http transport exhaustion") {
  set_retry_sleeper([](double) {});
  MockServerOptions so;
  so.fail_first = 100;
  so.fail_status = 503;
  MockProviderServer server(so);
  const int port = server.start();
  HttpEndpoint ep;
  ep.base_url = "http://127.0.0.1:" + std::to_string(port);
  RetryPolicy rp;
  rp.max_attempts = 3;
  try {
    post_json(ep, "/embed", R"({"texts":["a"]})", rp);
    FAIL("expected transport error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::transport);
  }
  CHECK(server.requests() == 3);
  server.stop();
  set_retry_sleeper(nullptr);
}

TEST_CASE("backoff grows and is capped") {
  RetryPolicy p;
  CHECK(p.backoff_ms(1) == 250.0);
  CHECK(p.backoff_ms(2) == 500.0);
  CHECK(p.backoff_ms(10) == 8000.0);
}
