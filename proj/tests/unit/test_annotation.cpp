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

#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "ctn/annotation.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace ctn;
using ctn::testing::TempDir;
using nlohmann::json;

namespace {

struct Fixture {
  std::vector<std::string> samples;
  std::vector<std::string> coders;
  std::vector<std::vector<Verdict>> table;  // [sample][coder]
};

Fixture load_fixture() {
  Fixture f;
  std::ifstream in(ctn::testing::fixture("annotation_verdicts.csv"));
  std::string line;
  std::getline(in, line);
  std::stringstream header(line);
  std::string cell;
  std::getline(header, cell, ',');
  while (std::getline(header, cell, ',')) f.coders.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::getline(row, cell, ',');
    f.samples.push_back(cell);
    std::vector<Verdict> vs;
    while (std::getline(row, cell, ',')) vs.push_back(cell == "Yes" ? Verdict::Yes : Verdict::No);
    f.table.push_back(vs);
  }
  return f;
}

std::unique_ptr<DatasetStore> store_with(const TempDir& dir, const std::vector<std::string>& ids) {
  auto store = DatasetStore::open(dir.path(), DatasetStore::Mode::read_write);
  std::vector<Document> docs;
  for (const auto& id : ids) {
    Document d;
    d.post_id = id;
    d.subreddit = "conspiracy";
    d.text = "text of " + id;
    docs.push_back(d);
  }
  store->put_documents(docs);
  return store;
}

PhaseConfig phase_for(const Fixture& f, std::string id = "pilot1") {
  PhaseConfig c;
  c.id = std::move(id);
  c.kind = CodingPhase::pilot;
  c.samples = f.samples;
  c.coders = f.coders;
  return c;
}

void submit_all(AnnotationService& svc, const Fixture& f, const std::string& phase) {
  for (std::size_t s = 0; s < f.samples.size(); ++s)
    for (std::size_t c = 0; c < f.coders.size(); ++c) svc.submit_verdict(f.coders[c], f.samples[s], f.table[s][c], phase);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::io;
}

}  // namespace

TEST_CASE("disagreement queue from the five-coder fixture") {
  const auto f = load_fixture();
  REQUIRE(f.samples.size() == 100);
  REQUIRE(f.coders.size() == 5);
  TempDir dir("ann");
  auto store = store_with(dir, f.samples);
  AnnotationService svc(*store);
  std::int64_t t = 1000;
  svc.set_clock([&] { return t++; });
  svc.create_phase(phase_for(f));
  CHECK(svc.next_batch("c1", "pilot1").size() == 100);
  submit_all(svc, f, "pilot1");
  const auto q = svc.disagreement_queue("pilot1");
  CHECK(q.size() == 27);
  const auto u = svc.unanimous("pilot1");
  CHECK(u.size() == 73);
  std::set<std::string> all(u.begin(), u.end());
  for (const auto& item : q) {
    CHECK(item.yes > 0);
    CHECK(item.no > 0);
    CHECK(item.yes + item.no == 5);
    CHECK(all.insert(item.post_id).second);
  }
  CHECK(all.size() == 100);
  CHECK(svc.phase("pilot1").status == PhaseStatus::in_discussion);

  // agreement matches a direct kappa over the same columns
  const auto rep = svc.agreement("pilot1");
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      std::vector<Verdict> a, b;
      for (const auto& row : f.table) {
        a.push_back(row[i]);
        b.push_back(row[j]);
      }
      REQUIRE(rep.pairwise[i][j].has_value());
      CHECK(rep.pairwise[i][j]->kappa == cohen_kappa(a, b).kappa);
    }
  REQUIRE(rep.fleiss.has_value());
  Eigen::MatrixXi counts(100, 2);
  for (int s = 0; s < 100; ++s) {
    const auto& row = f.table[static_cast<std::size_t>(s)];
    counts(s, 0) = static_cast<int>(std::count(row.begin(), row.end(), Verdict::Yes));
    counts(s, 1) = 5 - counts(s, 0);
  }
  CHECK(rep.fleiss->kappa == fleiss_kappa(counts, 5).kappa);

  // resolve everything, the phase closes
  for (const auto& item : q) svc.record_consensus(item.post_id, Verdict::Yes, "pilot1");
  for (const auto& s : u) {
    const auto idx = static_cast<std::size_t>(std::find(f.samples.begin(), f.samples.end(), s) - f.samples.begin());
    svc.record_consensus(s, f.table[idx][0], "pilot1");
  }
  CHECK(svc.disagreement_queue("pilot1").empty());
  CHECK(svc.disagreement_queue("pilot1", true).size() == 27);
  CHECK(svc.phase("pilot1").status == PhaseStatus::closed);
  CHECK(code_of([&] { svc.submit_verdict("c1", f.samples[0], Verdict::No, "pilot1"); }) == ErrorCode::state);
  CHECK(code_of([&] { svc.next_batch("c1", "pilot1"); }) == ErrorCode::state);
  CHECK(store->labels().size() == 100);
  CHECK(store->label(q[0].post_id)->origin == LabelOrigin::consensus);
}

TEST_CASE("batches, independence and resubmission") {
  const auto f = load_fixture();
  TempDir dir("ann2");
  auto store = store_with(dir, f.samples);
  AnnotationService svc(*store);
  auto cfg = phase_for(f);
  cfg.samples.resize(80);
  svc.create_phase(cfg);
  for (int i = 0; i < 30; ++i) svc.submit_verdict("c2", cfg.samples[static_cast<std::size_t>(i)], Verdict::Yes, "pilot1");
  const auto batch = svc.next_batch("c2", "pilot1");
  CHECK(batch.size() == 50);
  CHECK(batch.front().post_id == cfg.samples[30]);
  CHECK(svc.next_batch("c3", "pilot1").size() == 80);

  svc.submit_verdict("c2", cfg.samples[0], Verdict::No, "pilot1");
  const auto v = svc.phase("pilot1");
  CHECK(v.verdicts.at({cfg.samples[0], "c2"}) == Verdict::No);
  std::size_t events = 0;
  for (const auto& e : svc.audit_events("pilot1"))
    if (e["event"] == "verdict" && e["post_id"] == cfg.samples[0]) ++events;
  CHECK(events == 2);

  CHECK(code_of([&] { svc.next_batch("stranger", "pilot1"); }) == ErrorCode::auth);
  CHECK(code_of([&] { svc.submit_verdict("c1", f.samples[95], Verdict::No, "pilot1"); }) == ErrorCode::domain);
  CHECK(code_of([&] { svc.submit_verdict("c1", f.samples[0], Verdict::No, "pilot1", 2); }) == ErrorCode::domain);
  CHECK(code_of([&] { svc.phase("nope"); }) == ErrorCode::not_found);
  CHECK(code_of([&] { svc.create_phase(cfg); }) == ErrorCode::conflict);
  auto missing = cfg;
  missing.id = "other";
  missing.samples = {"ghost"};
  CHECK(code_of([&] { svc.create_phase(missing); }) == ErrorCode::not_found);
}

TEST_CASE("consensus conflicts, override and auto consensus") {
  const auto f = load_fixture();
  TempDir dir("ann3");
  auto store = store_with(dir, f.samples);
  AnnotationService svc(*store);
  auto cfg = phase_for(f);
  cfg.auto_consensus = true;
  svc.create_phase(cfg);
  submit_all(svc, f, "pilot1");
  CHECK(svc.phase("pilot1").consensus.size() == 73);
  CHECK(store->labels().size() == 73);
  const auto q = svc.disagreement_queue("pilot1");
  REQUIRE(q.size() == 27);
  svc.record_consensus(q[0].post_id, Verdict::No, "pilot1");
  CHECK(code_of([&] { svc.record_consensus(q[0].post_id, Verdict::Yes, "pilot1"); }) == ErrorCode::conflict);
  svc.record_consensus(q[0].post_id, Verdict::Yes, "pilot1", true);
  CHECK(store->label(q[0].post_id)->label == Label::CT);
  CHECK(svc.phase("pilot1").consensus.at(q[0].post_id) == Verdict::Yes);
}

TEST_CASE("replay reproduces state") {
  const auto f = load_fixture();
  TempDir dir("ann4");
  auto store = store_with(dir, f.samples);
  {
    AnnotationService svc(*store);
    svc.create_phase(phase_for(f));
    submit_all(svc, f, "pilot1");
    svc.record_consensus(f.samples[1], Verdict::Yes, "pilot1");
    const auto events = svc.audit_events();
    const auto replayed = AnnotationService::replay(events);
    CHECK(replayed.at("pilot1").verdicts == svc.phase("pilot1").verdicts);
    CHECK(replayed.at("pilot1").consensus == svc.phase("pilot1").consensus);
  }
  AnnotationService again(*store);
  const auto v = again.phase("pilot1");
  CHECK(v.verdicts.size() == 500);
  CHECK(v.consensus.size() == 1);
  // s002 is split and now resolved
  CHECK(again.disagreement_queue("pilot1").size() == 26);
}

TEST_CASE("group mode rates per group") {
  const auto f = load_fixture();
  TempDir dir("ann5");
  auto store = store_with(dir, f.samples);
  AnnotationService svc(*store);
  PhaseConfig cfg;
  cfg.id = "consol";
  cfg.kind = CodingPhase::consolidation;
  cfg.samples = {f.samples[0], f.samples[1]};
  cfg.coders = {"a1", "a2", "b1"};
  cfg.groups = {{"a1", "A"}, {"a2", "A"}, {"b1", "B"}};
  svc.create_phase(cfg);
  CHECK(svc.phase("consol").config.raters() == std::vector<std::string>{"A", "B"});
  svc.submit_verdict("a1", f.samples[0], Verdict::Yes, "consol");
  CHECK(svc.next_batch("a2", "consol").size() == 1);
  svc.submit_verdict("b1", f.samples[0], Verdict::No, "consol");
  CHECK(svc.disagreement_queue("consol").size() == 1);
  const auto rep = svc.agreement("consol");
  CHECK(rep.raters.size() == 2);
}

TEST_CASE("http api status codes") {
  const auto f = load_fixture();
  TempDir dir("ann6");
  auto store = store_with(dir, f.samples);
  AnnotationService svc(*store);
  svc.create_phase(phase_for(f));
  std::vector<TokenEntry> tokens{{"c1", "tok-c1", false}, {"mod", "tok-mod", true}};
  ServerOptions opts;
  opts.port = 0;
  AnnotationServer server(svc, tokens, opts);
  const int port = server.bind();
  std::thread worker([&] { server.serve(); });

  httplib::Client cli("127.0.0.1", port);
  const httplib::Headers c1{{"Authorization", "Bearer tok-c1"}}, mod{{"Authorization", "Bearer tok-mod"}};
  auto res = cli.Get("/api/me");
  REQUIRE(res);
  CHECK(res->status == 401);
  CHECK(json::parse(res->body)["error"]["code"] == "auth_error");
  res = cli.Get("/api/me", {{"Authorization", "Bearer wrong"}});
  CHECK(res->status == 401);
  res = cli.Get("/api/me", c1);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["coder"] == "c1");

  res = cli.Get("/api/phases/pilot1/next", c1);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["count"] == 100);
  res = cli.Get("/api/phases/none/next", c1);
  CHECK(res->status == 404);
  res = cli.Get("/api/phases/pilot1/next?coder=c2", c1);
  CHECK(res->status == 403);

  for (std::size_t c = 0; c < 5; ++c) {
    json body{{"phase", "pilot1"}, {"post_id", f.samples[1]}, {"verdict", f.table[1][c] == Verdict::Yes ? "Yes" : "No"},
              {"coder", f.coders[c]}};
    res = cli.Post("/api/verdicts", mod, body.dump(), "application/json");
    CHECK(res->status == 200);
  }
  res = cli.Post("/api/verdicts", c1, R"({"phase":"pilot1","post_id":")" + f.samples[2] + R"(","verdict":"maybe"})",
                 "application/json");
  CHECK(res->status == 400);
  res = cli.Post("/api/verdicts", c1, "not json", "application/json");
  CHECK(res->status == 400);

  res = cli.Get("/api/phases/pilot1/disagreements", c1);
  const auto dis = json::parse(res->body);
  CHECK(dis["count"] == 1);
  CHECK(dis["items"][0]["histogram"]["Yes"].get<int>() + dis["items"][0]["histogram"]["No"].get<int>() == 5);

  const std::string cons = json{{"phase", "pilot1"}, {"post_id", f.samples[1]}, {"verdict", "Yes"}}.dump();
  res = cli.Post("/api/consensus", c1, cons, "application/json");
  CHECK(res->status == 403);
  res = cli.Post("/api/consensus", mod, cons, "application/json");
  CHECK(res->status == 200);
  res = cli.Post("/api/consensus", mod, cons, "application/json");
  CHECK(res->status == 409);

  res = cli.Get("/api/agreement/pilot1", c1);
  CHECK(res->status == 200);
  res = cli.Get("/api/audit?phase=pilot1", mod);
  CHECK(json::parse(res->body)["events"].size() == 7);

  server.stop();
  worker.join();
  CHECK(http_status_for(ErrorCode::state) == 409);
  CHECK(http_status_for(ErrorCode::io) == 500);
}

TEST_CASE("token file") {
  TempDir dir("tok");
  ctn::testing::spit(dir / "t.json", R"({"tokens":[{"coder":"a","token":"x","moderator":true}]})");
  const auto t = load_tokens(dir / "t.json");
  REQUIRE(t.size() == 1);
  CHECK(t[0].moderator);
  ctn::testing::spit(dir / "bad.json", R"({"nope":1})");
  CHECK_THROWS_AS(load_tokens(dir / "bad.json"), Error);
}
