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


#include "ctn/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ctn/analysis.hpp"
#include "ctn/annotation.hpp"
#include "ctn/classifiers.hpp"
#include "ctn/config.hpp"
#include "ctn/corpus.hpp"
#include "ctn/embedding.hpp"
#include "ctn/error.hpp"
#include "ctn/evaluation.hpp"
#include "ctn/llm.hpp"
#include "ctn/logging.hpp"
#include "ctn/mock_server.hpp"
#include "ctn/sampling.hpp"
#include "ctn/stats.hpp"
#include "ctn/store.hpp"

namespace ctn::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::optional<std::string> config_file;
  std::optional<std::string> log_level;
  PipelineConfig cfg;
};

// flag > env > file > fallback
std::string pick(const std::optional<std::string>& flag, const Context& c, const char* section, const char* key,
                 std::string fallback) {
  return flag ? *flag : c.cfg.get_string(section, key, std::move(fallback));
}
double pick(const std::optional<double>& flag, const Context& c, const char* section, const char* key, double fallback) {
  return flag ? *flag : c.cfg.get_double(section, key, fallback);
}
long long pick(const std::optional<long long>& flag, const Context& c, const char* section, const char* key,
               long long fallback) {
  return flag ? *flag : c.cfg.get_int(section, key, fallback);
}

void emit(Context& c, const std::optional<std::string>& path, const std::string& content) {
  if (!path || *path == "-") {
    c.out << content;
    return;
  }
  const fs::path p(*path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::io, "cannot write " + p.string());
  f << content;
  if (!f.flush()) fail(ErrorCode::io, "write failed on " + p.string());
}

std::unique_ptr<DatasetStore> open_store(const Context& c, const std::optional<std::string>& flag, DatasetStore::Mode mode) {
  const std::string dir = pick(flag, c, "store", "path", "");
  if (dir.empty()) fail(ErrorCode::parameter, "no store given (--store, CTN_STORE_PATH or store.path in the config)");
  if (mode == DatasetStore::Mode::read_only && !fs::exists(fs::path(dir) / "index.json"))
    fail(ErrorCode::not_found, "no dataset store at " + dir);
  return DatasetStore::open(dir, mode);
}

std::vector<std::string> read_id_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot read " + path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

std::vector<std::string> split_csv(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& s) {
  std::vector<double> out;
  for (const auto& t : split_csv(s)) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size()) fail(ErrorCode::parse, "not a number: '" + t + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<Verdict> parse_verdicts(const std::string& s) {
  std::vector<Verdict> out;
  for (const auto& t : split_csv(s)) {
    const auto v = parse_verdict_word(t);
    if (!v) fail(ErrorCode::parse, "not a verdict: '" + t + "'");
    out.push_back(*v);
  }
  return out;
}

HttpEndpoint endpoint_for(const Context& c, const char* section, const std::optional<std::string>& base_url,
                          const std::optional<std::string>& api_key) {
  HttpEndpoint ep;
  ep.base_url = pick(base_url, c, section, "base_url", "");
  if (ep.base_url.empty()) fail(ErrorCode::parameter, std::string(section) + ": no base URL (--base-url)");
  const std::string key = pick(api_key, c, section, "api_key", "");
  if (!key.empty()) ep.headers["Authorization"] = "Bearer " + key;
  ep.timeout_s = c.cfg.get_double(section, "timeout_s", 120.0);
  return ep;
}

RetryPolicy retry_for(const Context& c, const char* section) {
  RetryPolicy r;
  r.max_attempts = static_cast<int>(c.cfg.get_int(section, "max_attempts", r.max_attempts));
  r.base_delay_ms = c.cfg.get_double(section, "base_delay_ms", r.base_delay_ms);
  r.max_delay_ms = c.cfg.get_double(section, "max_delay_ms", r.max_delay_ms);
  return r;
}

std::vector<PredictionRecord> load_predictions(const Context& c, const std::optional<std::string>& file,
                                               const std::optional<std::string>& store_dir,
                                               const std::optional<std::string>& model_id, int run_index) {
  std::vector<PredictionRecord> all;
  if (file) {
    all = read_predictions_file(*file);
  } else {
    auto store = open_store(c, store_dir, DatasetStore::Mode::read_only);
    all = store->predictions(model_id);
  }
  std::vector<PredictionRecord> out;
  for (auto& r : all) {
    if (model_id && r.model_id != *model_id) continue;
    if (r.run_index != run_index || r.status != "ok") continue;
    out.push_back(std::move(r));
  }
  if (out.empty()) fail(ErrorCode::not_found, "no predictions selected");
  std::set<std::string> models;
  for (const auto& r : out) models.insert(r.model_id);
  if (models.size() > 1) fail(ErrorCode::parameter, "predictions mix several models; choose one with --model-id");
  return out;
}

ordered_json kappa_json(const KappaResult& k) {
  return {{"kappa", k.kappa}, {"observed_agreement", k.observed_agreement}, {"expected_agreement", k.expected_agreement},
          {"n_items", k.n_items}};
}

ordered_json utest_json(const UTestResult& t) {
  return {{"u_statistic", t.u_statistic}, {"n1", t.n1}, {"n2", t.n2}, {"p_two_sided", t.p_two_sided},
          {"method", to_string(t.method)}};
}

ordered_json model_summary(const TrainedModel& m, const std::string& path) {
  ordered_json j{{"model", to_string(m.kind)}, {"path", path}, {"fingerprint", m.fingerprint}, {"dim", m.dim()}};
  j["hyperparameters"] = m.hyperparameters;
  if (m.kind == ModelKind::KNN) {
    j["k"] = m.k;
    j["train_size"] = m.train_ids.size();
  } else {
    j["iterations"] = m.iterations;
    j["final_loss"] = m.loss_trace.empty() ? ordered_json(nullptr) : ordered_json(m.loss_trace.back());
  }
  return j;
}

AnnotationServer* g_server = nullptr;
MockProviderServer* g_mock = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
  if (g_mock) g_mock->stop();
}

void setup(CLI::App& app, Context& c) {
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", c.config_file, "JSON config file (sections per stage)");
  app.add_option("--log-level", c.log_level, "debug|info|warn|error|off");

  // ingest -------------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("ingest", "Stream post dumps (.ndjson or .zst) into the store");
    auto store = std::make_shared<std::optional<std::string>>();
    auto files = std::make_shared<std::vector<std::string>>();
    auto min_chars = std::make_shared<std::optional<long long>>();
    auto since = std::make_shared<std::optional<long long>>();
    auto until = std::make_shared<std::optional<long long>>();
    auto zstd = std::make_shared<bool>(false);
    auto parallel = std::make_shared<std::optional<long long>>();
    auto report = std::make_shared<std::optional<std::string>>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("files", *files, "dump files")->required()->check(CLI::ExistingFile);
    sc->add_option("--min-chars", *min_chars, "minimum text length in characters (30)");
    sc->add_option("--since", *since, "earliest created_utc, inclusive");
    sc->add_option("--until", *until, "latest created_utc, inclusive");
    sc->add_flag("--zstd", *zstd, "treat every input as zstd");
    sc->add_option("--parallel", *parallel, "files read concurrently");
    sc->add_option("--report", *report, "write the ingest report here");
    sc->callback([=, &c] {
      IngestOptions opts;
      opts.min_chars = static_cast<std::size_t>(pick(*min_chars, c, "ingest", "min_chars", kDefaultMinChars));
      if (*since) opts.since = **since;
      if (*until) opts.until = **until;
      opts.force_zstd = *zstd;
      opts.parallel_files = static_cast<std::size_t>(std::max(1LL, pick(*parallel, c, "ingest", "parallel", 1)));
      std::vector<fs::path> paths(files->begin(), files->end());
      IngestReport rep;
      const auto docs = ingest_files(paths, opts, rep);
      auto st = open_store(c, *store, DatasetStore::Mode::read_write);
      st->put_documents(docs);
      ordered_json j{{"lines", rep.lines},
                     {"parsed", rep.parsed},
                     {"skipped_malformed", rep.skipped_malformed},
                     {"skipped_missing_field", rep.skipped_missing_field},
                     {"duplicates", rep.duplicates},
                     {"out_of_window", rep.out_of_window},
                     {"full_count", rep.full_count},
                     {"clean_count", rep.clean_count},
                     {"too_short", rep.too_short},
                     {"documents", rep.documents},
                     {"store_documents", st->document_count()}};
      ordered_json per = ordered_json::object();
      for (const auto& [sub, n] : rep.per_subreddit)
        per[sub] = {{"full", n.full}, {"clean", n.clean}, {"documents", n.documents}};
      j["per_subreddit"] = per;
      log_info("ingest", "done", {{"documents", rep.documents}, {"skipped", rep.skipped_malformed + rep.skipped_missing_field}});
      emit(c, *report, j.dump(2) + "\n");
    });
  }

  // sample -------------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("sample", "Draw an annotation sample of document ids");
    auto store = std::make_shared<std::optional<std::string>>();
    auto n = std::make_shared<long long>(0);
    auto subs = std::make_shared<std::vector<std::string>>();
    auto seed = std::make_shared<std::optional<long long>>();
    auto outp = std::make_shared<std::optional<std::string>>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("-n,--count", *n, "sample size")->required()->check(CLI::PositiveNumber);
    sc->add_option("--subreddit", *subs, "restrict to these subreddits");
    sc->add_option("--seed", *seed, "sampling seed");
    sc->add_option("--out", *outp, "write ids here (one per line)");
    sc->callback([=, &c] {
      auto st = open_store(c, *store, DatasetStore::Mode::read_only);
      const auto ids = sample_for_annotation(*st, static_cast<std::size_t>(*n), {subs->begin(), subs->end()},
                                             static_cast<std::uint64_t>(pick(*seed, c, "sample", "seed", 0)));
      std::string text;
      for (const auto& id : ids) text += id + "\n";
      emit(c, *outp, text);
    });
  }

  // split --------------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("split", "Stratified k-fold split of the labeled documents");
    auto store = std::make_shared<std::optional<std::string>>();
    auto k = std::make_shared<std::optional<long long>>();
    auto seed = std::make_shared<std::optional<long long>>();
    auto id = std::make_shared<std::optional<std::string>>();
    auto override_ = std::make_shared<bool>(false);
    sc->add_option("--store", *store, "store directory");
    sc->add_option("-k,--folds", *k, "number of folds (5)");
    sc->add_option("--seed", *seed, "split seed");
    sc->add_option("--id", *id, "split id (default cv<k>)");
    sc->add_flag("--override", *override_, "replace an existing split with this id");
    sc->callback([=, &c] {
      auto st = open_store(c, *store, DatasetStore::Mode::read_write);
      Split s;
      s.k = static_cast<int>(pick(*k, c, "split", "k", 5));
      s.seed = static_cast<std::uint64_t>(pick(*seed, c, "split", "seed", 0));
      s.id = pick(*id, c, "split", "id", "cv" + std::to_string(s.k));
      const auto labels = st->labels();
      s.assignments = make_stratified_folds(labels, s.k, s.seed);
      st->put_split(s, *override_);
      std::map<std::string, Label> truth;
      for (const auto& l : labels) truth[l.post_id] = l.label;
      std::vector<std::array<std::size_t, 2>> counts(static_cast<std::size_t>(s.k), {0, 0});
      for (const auto& a : s.assignments) ++counts[static_cast<std::size_t>(a.fold)][truth[a.post_id] == Label::CT ? 0 : 1];
      ordered_json folds = ordered_json::array();
      for (int f = 0; f < s.k; ++f)
        folds.push_back({{"fold", f}, {"ct", counts[static_cast<std::size_t>(f)][0]}, {"non_ct", counts[static_cast<std::size_t>(f)][1]}});
      emit(c, std::nullopt, ordered_json{{"split_id", s.id}, {"k", s.k}, {"seed", s.seed}, {"folds", folds}}.dump(2) + "\n");
    });
  }

  // import-labels ------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("import-labels", "Load external labels (CSV post_id,label or NDJSON)");
    auto store = std::make_shared<std::optional<std::string>>();
    auto file = std::make_shared<std::string>();
    auto override_ = std::make_shared<bool>(false);
    sc->add_option("--store", *store, "store directory");
    sc->add_option("file", *file, "labels file")->required()->check(CLI::ExistingFile);
    sc->add_flag("--override", *override_, "replace labels that already exist");
    sc->callback([=, &c] {
      std::ifstream in(*file);
      std::vector<LabeledSample> samples;
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        LabeledSample s;
        std::string label;
        if (line.front() == '{') {
          json j = json::parse(line, nullptr, false);
          if (j.is_discarded()) fail(ErrorCode::parse, *file + ":" + std::to_string(lineno) + ": bad JSON");
          s.post_id = j.at("post_id").get<std::string>();
          label = j.at("label").is_string() ? j["label"].get<std::string>() : j["label"].dump();
        } else {
          const auto cols = split_csv(line);
          if (cols.size() < 2) fail(ErrorCode::parse, *file + ":" + std::to_string(lineno) + ": expected post_id,label");
          if (lineno == 1 && cols[0] == "post_id") continue;
          s.post_id = cols[0];
          label = cols[1];
        }
        const auto parsed = parse_label(label);
        if (!parsed) fail(ErrorCode::parse, *file + ":" + std::to_string(lineno) + ": bad label '" + label + "'");
        s.label = *parsed;
        samples.push_back(s);
      }
      auto st = open_store(c, *store, DatasetStore::Mode::read_write);
      for (const auto& s : samples)
        if (!st->has_document(s.post_id)) fail(ErrorCode::not_found, "label for unknown document '" + s.post_id + "'");
      st->put_labels(samples, *override_);
      emit(c, std::nullopt, ordered_json{{"imported", samples.size()}, {"labels", st->labels().size()}}.dump() + "\n");
    });
  }

  // phase-create -------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("phase-create", "Open an annotation phase");
    auto store = std::make_shared<std::optional<std::string>>();
    auto cfg = std::make_shared<PhaseConfig>();
    auto kind = std::make_shared<std::string>("pilot");
    auto samples = std::make_shared<std::string>();
    auto coders = std::make_shared<std::string>();
    auto groups = std::make_shared<std::vector<std::string>>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("--id", cfg->id, "phase id")->required();
    sc->add_option("--kind", *kind, "pilot|consolidation|conclusion");
    sc->add_option("--round", cfg->round, "round number");
    sc->add_option("--samples", *samples, "file of post ids, one per line")->required()->check(CLI::ExistingFile);
    sc->add_option("--coders", *coders, "comma-separated coder ids")->required();
    sc->add_option("--group", *groups, "coder=group (consolidation group mode)");
    sc->add_flag("--auto-consensus", cfg->auto_consensus, "record unanimous verdicts as consensus");
    sc->callback([=, &c] {
      PhaseConfig pc = *cfg;
      const auto k = parse_coding_phase(*kind);
      if (!k) fail(ErrorCode::parameter, "unknown phase kind '" + *kind + "'");
      pc.kind = *k;
      pc.samples = read_id_file(*samples);
      pc.coders = split_csv(*coders);
      for (const auto& g : *groups) {
        const auto eq = g.find('=');
        if (eq == std::string::npos) fail(ErrorCode::parameter, "--group expects coder=group");
        pc.groups[g.substr(0, eq)] = g.substr(eq + 1);
      }
      auto st = open_store(c, *store, DatasetStore::Mode::read_write);
      AnnotationService svc(*st);
      svc.create_phase(pc);
      emit(c, std::nullopt, ordered_json{{"phase", pc.id}, {"samples", pc.samples.size()}, {"raters", pc.raters()}}.dump() + "\n");
    });
  }

  // annotate-serve -----------------------------------------------------------
  {
    auto* sc = app.add_subcommand("annotate-serve", "Serve the annotation HTTP API (and optional UI assets)");
    auto store = std::make_shared<std::optional<std::string>>();
    auto port = std::make_shared<std::optional<long long>>();
    auto host = std::make_shared<std::optional<std::string>>();
    auto tokens = std::make_shared<std::optional<std::string>>();
    auto ui = std::make_shared<std::optional<std::string>>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("--port", *port, "listen port (8080)");
    sc->add_option("--host", *host, "listen address (127.0.0.1)");
    sc->add_option("--tokens", *tokens, "token file {\"tokens\":[{coder,token,moderator}]}");
    sc->add_option("--ui-dir", *ui, "static UI assets to mount at /");
    sc->callback([=, &c] {
      auto st = open_store(c, *store, DatasetStore::Mode::read_write);
      const std::string token_file = pick(*tokens, c, "server", "tokens", "");
      if (token_file.empty()) fail(ErrorCode::parameter, "annotate-serve needs --tokens");
      AnnotationService svc(*st);
      ServerOptions opts;
      opts.host = pick(*host, c, "server", "host", "127.0.0.1");
      opts.port = static_cast<int>(pick(*port, c, "server", "port", 8080));
      const std::string ui_dir = pick(*ui, c, "server", "ui_dir", "");
      if (!ui_dir.empty()) opts.ui_dir = ui_dir;
      AnnotationServer server(svc, load_tokens(token_file), opts);
      const int bound = server.bind();
      c.out << ordered_json{{"listening", opts.host}, {"port", bound}}.dump() << std::endl;
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.serve();
      g_server = nullptr;
    });
  }

  // agreement ----------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("agreement", "Agreement statistics of an annotation phase");
    auto store = std::make_shared<std::optional<std::string>>();
    auto phase = std::make_shared<std::string>();
    auto outp = std::make_shared<std::optional<std::string>>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("--phase", *phase, "phase id")->required();
    sc->add_option("--out", *outp, "write JSON here");
    sc->callback([=, &c] {
      auto st = open_store(c, *store, DatasetStore::Mode::read_only);
      AnnotationService svc(*st);
      emit(c, *outp, svc.agreement(*phase).to_json().dump(2) + "\n");
    });
  }

  // embed --------------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("embed", "Embed documents missing from the embedding cache");
    auto store = std::make_shared<std::optional<std::string>>();
    auto provider = std::make_shared<std::optional<std::string>>();
    auto base_url = std::make_shared<std::optional<std::string>>();
    auto api_key = std::make_shared<std::optional<std::string>>();
    auto model = std::make_shared<std::optional<std::string>>();
    auto dim = std::make_shared<std::optional<long long>>();
    auto batch = std::make_shared<std::optional<long long>>();
    auto parallel = std::make_shared<std::optional<long long>>();
    auto labeled_only = std::make_shared<bool>(false);
    auto subs = std::make_shared<std::vector<std::string>>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("--provider", *provider, "mock|http");
    sc->add_option("--base-url", *base_url, "embedding service URL (http provider)");
    sc->add_option("--api-key", *api_key, "bearer token for the embedding service");
    sc->add_option("--model", *model, "model name sent to the service");
    sc->add_option("--dim", *dim, "mock provider dimension (64)");
    sc->add_option("--batch", *batch, "texts per request (64)");
    sc->add_option("--parallel", *parallel, "concurrent requests (4)");
    sc->add_flag("--labeled-only", *labeled_only, "only labeled documents");
    sc->add_option("--subreddit", *subs, "restrict to these subreddits");
    sc->callback([=, &c] {
      auto st = open_store(c, *store, DatasetStore::Mode::read_write);
      const std::string kind = pick(*provider, c, "embedding", "provider", "mock");
      std::unique_ptr<EmbeddingProvider> p;
      if (kind == "mock") {
        p = std::make_unique<MockEmbeddingProvider>(static_cast<int>(pick(*dim, c, "embedding", "dim", 64)),
                                                    pick(*model, c, "embedding", "model", "mock-hash-bow"));
      } else if (kind == "http") {
        p = std::make_unique<HttpEmbeddingProvider>(endpoint_for(c, "embedding", *base_url, *api_key),
                                                    retry_for(c, "embedding"), "http", pick(*model, c, "embedding", "model", ""));
      } else {
        fail(ErrorCode::parameter, "unknown embedding provider '" + kind + "' (mock, http)");
      }
      DocumentFilter filter;
      filter.subreddits = {subs->begin(), subs->end()};
      filter.labeled_only = *labeled_only;
      const auto docs = st->get_documents(filter);
      EmbedOptions opts;
      opts.batch_size = static_cast<std::size_t>(std::max(1LL, pick(*batch, c, "embedding", "batch", 64)));
      opts.parallel = static_cast<std::size_t>(std::max(1LL, pick(*parallel, c, "embedding", "parallel", 4)));
      const auto rep = embed_documents(*st, *p, docs, opts);
      emit(c, std::nullopt,
           ordered_json{{"requested", rep.requested}, {"cached", rep.cached}, {"embedded", rep.embedded},
                        {"provider_calls", rep.provider_calls}, {"fingerprint", rep.fingerprint}}
                   .dump() + "\n");
    });
  }

  // train --------------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("train", "Train a classifier on labeled, embedded documents");
    auto store = std::make_shared<std::optional<std::string>>();
    auto model = std::make_shared<std::string>("lr");
    auto params = std::make_shared<std::vector<std::string>>();
    auto split = std::make_shared<std::optional<std::string>>();
    auto exclude = std::make_shared<std::optional<int>>();
    auto outp = std::make_shared<std::string>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("--model", *model, "lr|svm|knn");
    sc->add_option("--param", *params, "hyperparameter key=value (l2, lr, epochs, seed, c, k)");
    sc->add_option("--split", *split, "restrict training to this split");
    sc->add_option("--exclude-fold", *exclude, "leave this fold of the split out");
    sc->add_option("--out", *outp, "model file")->required();
    sc->callback([=, &c] {
      auto st = open_store(c, *store, DatasetStore::Mode::read_only);
      ModelSpec spec;
      spec.kind = parse_model_kind(*model);
      for (const auto& p : *params) {
        const auto eq = p.find('=');
        if (eq == std::string::npos) fail(ErrorCode::parameter, "--param expects key=value");
        apply_hyperparameter(spec, p.substr(0, eq), p.substr(eq + 1));
      }
      std::map<std::string, int> fold_of;
      if (*split)
        for (const auto& a : st->get_split(**split).assignments) fold_of[a.post_id] = a.fold;
      std::vector<std::string> ids;
      std::vector<Label> y;
      for (const auto& l : st->labels()) {
        if (*split) {
          const auto f = fold_of.find(l.post_id);
          if (f == fold_of.end() || (*exclude && f->second == **exclude)) continue;
        }
        ids.push_back(l.post_id);
        y.push_back(l.label);
      }
      const auto info = st->embedding_info();
      if (!info) fail(ErrorCode::state, "the store has no embeddings; run embed first");
      const Eigen::MatrixXd X = st->embedding_matrix(ids);
      const auto m = train_model(spec, X, y, ids, info->fingerprint);
      if (fs::path(*outp).has_parent_path()) fs::create_directories(fs::path(*outp).parent_path());
      save_model(m, *outp);
      emit(c, std::nullopt, model_summary(m, *outp).dump() + "\n");
    });
  }

  // eval ---------------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("eval", "Cross-validated evaluation over a stored split");
    auto store = std::make_shared<std::optional<std::string>>();
    auto split = std::make_shared<std::optional<std::string>>();
    auto models = std::make_shared<std::vector<std::string>>();
    auto params = std::make_shared<std::vector<std::string>>();
    auto outp = std::make_shared<std::optional<std::string>>();
    auto md = std::make_shared<std::optional<std::string>>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("--split", *split, "split id");
    sc->add_option("--model", *models, "lr|svm|knn (repeatable; default lr)");
    sc->add_option("--param", *params, "hyperparameter key=value, applied to every model");
    sc->add_option("--out", *outp, "metrics JSON");
    sc->add_option("--markdown", *md, "metrics table");
    sc->callback([=, &c] {
      auto st = open_store(c, *store, DatasetStore::Mode::read_only);
      const std::string split_id = pick(*split, c, "eval", "split", "cv5");
      std::vector<std::string> kinds = *models;
      if (kinds.empty()) kinds = {"lr"};
      std::vector<MetricsReport> reports;
      for (const auto& k : kinds) {
        ModelSpec spec;
        spec.kind = parse_model_kind(k);
        for (const auto& p : *params) {
          const auto eq = p.find('=');
          if (eq == std::string::npos) fail(ErrorCode::parameter, "--param expects key=value");
          apply_hyperparameter(spec, p.substr(0, eq), p.substr(eq + 1));
        }
        reports.push_back(evaluate_cv(spec, *st, split_id));
        log_info("eval", "model done", {{"model", reports.back().model_id}, {"f1", reports.back().f1.mean}});
      }
      std::string js;
      if (reports.size() == 1) {
        js = reports.front().to_json();
      } else {
        ordered_json arr = ordered_json::array();
        for (const auto& r : reports) arr.push_back(ordered_json::parse(r.to_json()));
        js = arr.dump(2) + "\n";
      }
      std::string table;
      for (std::size_t i = 0; i < reports.size(); ++i) {
        const std::string m = reports[i].to_markdown();
        if (i == 0) {
          table = m;
        } else {
          std::size_t cut = m.find('\n');
          cut = m.find('\n', cut + 1);
          table += m.substr(cut + 1);
        }
      }
      if (*md) emit(c, *md, table);
      emit(c, *outp, js);
    });
  }

  // classify -----------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("classify", "Score documents with a trained model");
    auto store = std::make_shared<std::optional<std::string>>();
    auto model_file = std::make_shared<std::string>();
    auto model_id = std::make_shared<std::optional<std::string>>();
    auto subs = std::make_shared<std::vector<std::string>>();
    auto outp = std::make_shared<std::optional<std::string>>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("--model-file", *model_file, "trained model")->required()->check(CLI::ExistingFile);
    sc->add_option("--model-id", *model_id, "id recorded with the predictions (default: model kind)");
    sc->add_option("--subreddit", *subs, "restrict to these subreddits");
    sc->add_option("--out", *outp, "also write the predictions as NDJSON here");
    sc->callback([=, &c] {
      auto st = open_store(c, *store, DatasetStore::Mode::read_write);
      const TrainedModel m = load_model(*model_file);
      DocumentFilter filter;
      filter.subreddits = {subs->begin(), subs->end()};
      const auto docs = st->get_documents(filter);
      std::vector<std::string> ids;
      for (const auto& d : docs) ids.push_back(d.post_id);
      const auto info = st->embedding_info();
      if (!info) fail(ErrorCode::state, "the store has no embeddings; run embed first");
      const Eigen::MatrixXd X = st->embedding_matrix(ids);
      const Eigen::VectorXd p = predict_proba(m, X, info->fingerprint);
      const std::string id = model_id->value_or(std::string(to_string(m.kind)));
      std::vector<PredictionRecord> recs;
      std::size_t positives = 0;
      for (std::size_t i = 0; i < docs.size(); ++i) {
        PredictionRecord r;
        r.post_id = docs[i].post_id;
        r.model_id = id;
        r.score = p(static_cast<Eigen::Index>(i));
        r.label = *r.score > 0.5 ? Label::CT : Label::NonCT;
        positives += *r.label == Label::CT ? 1 : 0;
        r.subreddit = docs[i].subreddit;
        r.num_comments = docs[i].num_comments;
        r.karma = docs[i].karma;
        recs.push_back(std::move(r));
      }
      st->put_predictions(recs);
      if (*outp) {
        if (fs::path(**outp).has_parent_path()) fs::create_directories(fs::path(**outp).parent_path());
        write_predictions_file(**outp, recs);
      }
      emit(c, std::nullopt, ordered_json{{"model_id", id}, {"documents", recs.size()}, {"predicted_ct", positives}}.dump() + "\n");
    });
  }

  // prompt-run ---------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("prompt-run", "Query a chat model over the labeled documents");
    auto store = std::make_shared<std::optional<std::string>>();
    auto strategy = std::make_shared<std::optional<std::string>>();
    auto shots = std::make_shared<std::optional<long long>>();
    auto runs = std::make_shared<std::optional<long long>>();
    auto split = std::make_shared<std::optional<std::string>>();
    auto test_fold = std::make_shared<std::optional<int>>();
    auto no_restrict = std::make_shared<bool>(false);
    auto any_shots = std::make_shared<bool>(false);
    auto provider = std::make_shared<std::optional<std::string>>();
    auto base_url = std::make_shared<std::optional<std::string>>();
    auto api_key = std::make_shared<std::optional<std::string>>();
    auto model = std::make_shared<std::optional<std::string>>();
    auto parallel = std::make_shared<std::optional<long long>>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("--strategy", *strategy, "simple|justification|sbs");
    sc->add_option("--shots", *shots, "demonstrations per class: 0, 1, 3 or 5");
    sc->add_option("--runs", *runs, "repetitions (10)");
    sc->add_option("--split", *split, "split whose training folds supply the demonstrations");
    sc->add_option("--test-fold", *test_fold, "only query this fold of the split");
    sc->add_flag("--no-fold-restrict", *no_restrict, "draw demonstrations from every labeled document");
    sc->add_flag("--allow-any-shots", *any_shots, "accept shot counts outside 0/1/3/5");
    sc->add_option("--provider", *provider, "mock|http");
    sc->add_option("--base-url", *base_url, "chat service URL (http provider)");
    sc->add_option("--api-key", *api_key, "bearer token for the chat service");
    sc->add_option("--model", *model, "chat model name");
    sc->add_option("--parallel", *parallel, "concurrent requests (4)");
    sc->callback([=, &c] {
      auto st = open_store(c, *store, DatasetStore::Mode::read_write);
      PromptRunConfig rc;
      rc.strategy = parse_strategy(pick(*strategy, c, "llm", "strategy", "simple"));
      rc.n_shots = static_cast<int>(pick(*shots, c, "llm", "shots", 0));
      rc.runs = static_cast<int>(pick(*runs, c, "llm", "runs", kDefaultRepetitions));
      rc.model = pick(*model, c, "llm", "model", rc.model);
      const std::string split_id = pick(*split, c, "llm", "split", "");
      if (!split_id.empty()) rc.split_id = split_id;
      rc.test_fold = *test_fold;
      if (rc.test_fold && !rc.split_id) fail(ErrorCode::parameter, "--test-fold needs --split");
      rc.fold_restrict = !*no_restrict;
      rc.allow_any_shots = *any_shots;
      rc.parallel = static_cast<std::size_t>(std::max(1LL, pick(*parallel, c, "llm", "parallel", 4)));
      const std::string kind = pick(*provider, c, "llm", "provider", "mock");
      std::unique_ptr<ChatProvider> p;
      if (kind == "mock") {
        p = std::make_unique<MockChatProvider>();
      } else if (kind == "http") {
        p = std::make_unique<HttpChatProvider>(endpoint_for(c, "llm", *base_url, *api_key), retry_for(c, "llm"),
                                               c.cfg.get_string("llm", "path", "/v1/chat/completions"));
      } else {
        fail(ErrorCode::parameter, "unknown chat provider '" + kind + "' (mock, http)");
      }
      const auto s = run_prompt_experiment(*st, *p, rc);
      emit(c, std::nullopt,
           ordered_json{{"model_id", llm_model_id(rc.strategy, rc.n_shots)}, {"completed", s.completed},
                        {"failed", s.failed}, {"skipped", s.skipped}, {"unparseable", s.unparseable}}
                   .dump() + "\n");
    });
  }

  // prompt-report ------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("prompt-report", "Aggregate prompt runs against the labels");
    auto store = std::make_shared<std::optional<std::string>>();
    auto outp = std::make_shared<std::optional<std::string>>();
    auto md = std::make_shared<std::optional<std::string>>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("--out", *outp, "metrics JSON");
    sc->add_option("--markdown", *md, "metrics table");
    sc->callback([=, &c] {
      auto st = open_store(c, *store, DatasetStore::Mode::read_only);
      std::map<std::string, Label> truth;
      for (const auto& l : st->labels()) truth[l.post_id] = l.label;
      const auto records = st->predictions();
      const auto groups = aggregate_runs(records, truth);
      if (groups.empty()) fail(ErrorCode::not_found, "no prompt runs in the store");
      if (*md) emit(c, *md, group_metrics_markdown(groups));
      emit(c, *outp, group_metrics_json(groups));
    });
  }

  // prevalence ---------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("prevalence", "Per-subreddit CT ratio with precision/recall bounds");
    auto store = std::make_shared<std::optional<std::string>>();
    auto file = std::make_shared<std::optional<std::string>>();
    auto model_id = std::make_shared<std::optional<std::string>>();
    auto run = std::make_shared<int>(0);
    auto precision = std::make_shared<std::optional<double>>();
    auto recall = std::make_shared<std::optional<double>>();
    auto outp = std::make_shared<std::optional<std::string>>();
    auto md = std::make_shared<std::optional<std::string>>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("--predictions", *file, "predictions NDJSON instead of the store");
    sc->add_option("--model-id", *model_id, "which stored model's predictions");
    sc->add_option("--run-index", *run, "which run (0)");
    sc->add_option("--precision", *precision, "classifier precision");
    sc->add_option("--recall", *recall, "classifier recall");
    sc->add_option("--out", *outp, "table JSON");
    sc->add_option("--markdown", *md, "table markdown");
    sc->callback([=, &c] {
      const auto preds = load_predictions(c, *file, *store, *model_id, *run);
      const double p = pick(*precision, c, "prevalence", "precision", -1.0);
      const double r = pick(*recall, c, "prevalence", "recall", -1.0);
      if (p < 0 || r < 0) fail(ErrorCode::parameter, "prevalence needs --precision and --recall");
      const auto table = prevalence(preds, p, r);
      if (*md) emit(c, *md, table.to_markdown());
      emit(c, *outp, table.to_json());
    });
  }

  // engagement ---------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("engagement", "Compare comments and karma of predicted CT vs non-CT posts");
    auto store = std::make_shared<std::optional<std::string>>();
    auto file = std::make_shared<std::optional<std::string>>();
    auto model_id = std::make_shared<std::optional<std::string>>();
    auto run = std::make_shared<int>(0);
    auto cap = std::make_shared<std::optional<long long>>();
    auto outp = std::make_shared<std::optional<std::string>>();
    auto csv = std::make_shared<std::optional<std::string>>();
    sc->add_option("--store", *store, "store directory");
    sc->add_option("--predictions", *file, "predictions NDJSON instead of the store");
    sc->add_option("--model-id", *model_id, "which stored model's predictions");
    sc->add_option("--run-index", *run, "which run (0)");
    sc->add_option("--exact-cap", *cap, "largest n1*n2 using the exact U distribution (400)");
    sc->add_option("--out", *outp, "report JSON");
    sc->add_option("--ecdf", *csv, "eCDF points as CSV");
    sc->callback([=, &c] {
      const auto preds = load_predictions(c, *file, *store, *model_id, *run);
      UTestOptions opts;
      opts.exact_cap = static_cast<std::size_t>(pick(*cap, c, "engagement", "exact_cap", 400));
      const auto rep = engagement_compare(engagement_samples(preds), opts);
      if (*csv) emit(c, *csv, rep.ecdf_csv());
      emit(c, *outp, rep.to_json());
    });
  }

  // stats --------------------------------------------------------------------
  {
    auto* st = app.add_subcommand("stats", "Standalone statistics");
    st->require_subcommand(1);
    {
      auto* sc = st->add_subcommand("utest", "Mann-Whitney U test");
      auto x = std::make_shared<std::string>();
      auto y = std::make_shared<std::string>();
      auto cap = std::make_shared<long long>(400);
      sc->add_option("--x", *x, "comma-separated sample")->required();
      sc->add_option("--y", *y, "comma-separated sample")->required();
      sc->add_option("--exact-cap", *cap, "largest n1*n2 using the exact distribution");
      sc->callback([=, &c] {
        UTestOptions o;
        o.exact_cap = static_cast<std::size_t>(*cap);
        const auto a = parse_numbers(*x), b = parse_numbers(*y);
        emit(c, std::nullopt, utest_json(mann_whitney_u(a, b, o)).dump() + "\n");
      });
    }
    {
      auto* sc = st->add_subcommand("auc", "Rank AUC");
      auto pos = std::make_shared<std::string>();
      auto neg = std::make_shared<std::string>();
      sc->add_option("--pos", *pos, "scores of positives")->required();
      sc->add_option("--neg", *neg, "scores of negatives")->required();
      sc->callback([=, &c] {
        emit(c, std::nullopt, ordered_json{{"auc", rank_auc(parse_numbers(*pos), parse_numbers(*neg))}}.dump() + "\n");
      });
    }
    {
      auto* sc = st->add_subcommand("kappa", "Cohen's kappa of two raters");
      auto a = std::make_shared<std::string>();
      auto b = std::make_shared<std::string>();
      sc->add_option("--a", *a, "verdicts (Yes/No or 1/0)")->required();
      sc->add_option("--b", *b, "verdicts (Yes/No or 1/0)")->required();
      sc->callback([=, &c] {
        const auto va = parse_verdicts(*a), vb = parse_verdicts(*b);
        emit(c, std::nullopt, kappa_json(cohen_kappa(va, vb)).dump() + "\n");
      });
    }
    {
      auto* sc = st->add_subcommand("fleiss", "Fleiss' kappa of an items x categories count matrix");
      auto m = std::make_shared<std::string>();
      auto raters = std::make_shared<int>(0);
      sc->add_option("--matrix", *m, "rows separated by ';', counts by ','")->required();
      sc->add_option("--raters", *raters, "raters per item")->required();
      sc->callback([=, &c] {
        std::vector<std::vector<double>> rows;
        for (const auto& r : split_csv(*m, ';')) rows.push_back(parse_numbers(r));
        if (rows.empty()) fail(ErrorCode::dimension, "empty matrix");
        Eigen::MatrixXi counts(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (rows[i].size() != rows[0].size()) fail(ErrorCode::dimension, "ragged matrix");
          for (std::size_t j = 0; j < rows[i].size(); ++j)
            counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<int>(rows[i][j]);
        }
        emit(c, std::nullopt, kappa_json(fleiss_kappa(counts, *raters)).dump() + "\n");
      });
    }
    {
      auto* sc = st->add_subcommand("ecdf", "Empirical CDF");
      auto v = std::make_shared<std::string>();
      sc->add_option("--values", *v, "comma-separated sample")->required();
      sc->callback([=, &c] {
        const auto vals = parse_numbers(*v);
        const Ecdf e(vals);
        emit(c, std::nullopt, ordered_json{{"x", e.support()}, {"F", e.cumulative()}, {"n", e.size()}}.dump() + "\n");
      });
    }
    {
      auto* sc = st->add_subcommand("bounds", "Prevalence bounds for positive ratios");
      auto ratios = std::make_shared<std::string>();
      auto p = std::make_shared<double>(0);
      auto r = std::make_shared<double>(0);
      sc->add_option("--ratio", *ratios, "comma-separated positive ratios")->required();
      sc->add_option("--precision", *p, "classifier precision")->required();
      sc->add_option("--recall", *r, "classifier recall")->required();
      sc->callback([=, &c] {
        ordered_json arr = ordered_json::array();
        for (double x : parse_numbers(*ratios)) {
          const auto b = prevalence_bounds(x, *p, *r);
          arr.push_back({{"pos_ratio", x}, {"upper_bound", b.upper}, {"lower_bound", b.lower}});
        }
        emit(c, std::nullopt, arr.dump() + "\n");
      });
    }
  }

  // mock-provider ------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("mock-provider", "Serve offline embedding and chat endpoints");
    auto opts = std::make_shared<MockServerOptions>();
    auto mode = std::make_shared<std::string>("keyword");
    sc->add_option("--host", opts->host, "listen address");
    sc->add_option("--port", opts->port, "listen port (0 picks one)");
    sc->add_option("--dim", opts->embed_dim, "embedding dimension");
    sc->add_option("--chat-mode", *mode, "keyword|echo");
    sc->add_option("--fail-first", opts->fail_first, "answer the first N requests with --fail-status");
    sc->add_option("--fail-status", opts->fail_status, "status used for injected failures");
    sc->callback([=, &c] {
      MockServerOptions o = *opts;
      if (*mode == "echo") {
        o.chat_mode = MockChatProvider::Mode::echo;
      } else if (*mode != "keyword") {
        fail(ErrorCode::parameter, "chat mode must be keyword or echo");
      }
      MockProviderServer server(o);
      const int port = server.bind();
      c.out << ordered_json{{"listening", o.host}, {"port", port}}.dump() << std::endl;
      g_mock = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.serve();
      g_mock = nullptr;
    });
  }

  // compact ------------------------------------------------------------------
  {
    auto* sc = app.add_subcommand("compact", "Rewrite store files without superseded records");
    auto store = std::make_shared<std::optional<std::string>>();
    sc->add_option("--store", *store, "store directory");
    sc->callback([=, &c] {
      auto st = open_store(c, *store, DatasetStore::Mode::read_write);
      st->compact();
      emit(c, std::nullopt, ordered_json{{"compacted", st->dir().string()}}.dump() + "\n");
    });
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context c{out, err, std::nullopt, std::nullopt, {}};
  CLI::App app{"Conspiracy-narrative classification pipeline", "ctnarr"};
  setup(app, c);

  // Config must be loaded before subcommand callbacks run.
  app.parse_complete_callback([&] {
    c.cfg = PipelineConfig::load(c.config_file ? std::optional<fs::path>(*c.config_file) : std::nullopt);
    const std::string level = c.log_level ? *c.log_level : c.cfg.get_string("log", "level", "info");
    Logger::global().set_level(parse_log_level(level));
    log_info("cli", "effective config", {{"config", c.cfg.redacted()}});
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help() << std::flush;
    return 2;
  } catch (const Error& e) {
    err << ordered_json{{"error", to_string(e.code())}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  } catch (const json::exception& e) {
    err << ordered_json{{"error", "parse_error"}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << ordered_json{{"error", "io_error"}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    err << ordered_json{{"error", "internal"}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  }
  return 0;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace ctn::cli
