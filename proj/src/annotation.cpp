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


#include "ctn/annotation.hpp"

#include <algorithm>
#include <array>
#include <ctime>
#include <fstream>
#include <set>

namespace ctn {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(PhaseStatus s) noexcept {
  switch (s) {
    case PhaseStatus::open: return "open";
    case PhaseStatus::in_discussion: return "in-discussion";
    case PhaseStatus::closed: return "closed";
  }
  return "open";
}

std::vector<std::string> PhaseConfig::raters() const {
  std::set<std::string> out;
  for (const auto& c : coders) out.insert(groups.empty() ? c : groups.at(c));
  return {out.begin(), out.end()};
}

namespace {

json config_json(const PhaseConfig& c) {
  return json{{"id", c.id},
              {"kind", to_string(c.kind)},
              {"round", c.round},
              {"samples", c.samples},
              {"coders", c.coders},
              {"groups", c.groups},
              {"auto_consensus", c.auto_consensus}};
}

PhaseConfig config_from_json(const json& j) {
  PhaseConfig c;
  c.id = j.at("id").get<std::string>();
  const auto kind = parse_coding_phase(j.at("kind").get<std::string>());
  if (!kind) fail(ErrorCode::parse, "unknown phase kind in audit log");
  c.kind = *kind;
  c.round = j.value("round", 1);
  c.samples = j.at("samples").get<std::vector<std::string>>();
  c.coders = j.at("coders").get<std::vector<std::string>>();
  if (j.contains("groups")) c.groups = j["groups"].get<std::map<std::string, std::string>>();
  c.auto_consensus = j.value("auto_consensus", false);
  return c;
}

Verdict verdict_of(const json& j) {
  const auto v = parse_verdict_word(j.get<std::string>());
  if (!v) fail(ErrorCode::parse, "bad verdict in audit log");
  return *v;
}

bool fully_labeled(const PhaseView& v, const std::string& post, const std::vector<std::string>& raters) {
  return std::all_of(raters.begin(), raters.end(), [&](const auto& r) { return v.verdicts.count({post, r}) > 0; });
}

void refresh(PhaseView& v) {
  const auto raters = v.config.raters();
  v.fully_labeled = 0;
  for (const auto& s : v.config.samples) v.fully_labeled += fully_labeled(v, s, raters) ? 1 : 0;
  if (v.consensus.size() == v.config.samples.size()) {
    v.status = PhaseStatus::closed;
  } else if (v.fully_labeled == v.config.samples.size()) {
    v.status = PhaseStatus::in_discussion;
  } else {
    v.status = PhaseStatus::open;
  }
}

}  // namespace

std::filesystem::path AnnotationService::audit_path(const std::filesystem::path& store_dir) {
  return store_dir / "annotation_audit.ndjson";
}

AnnotationService::AnnotationService(DatasetStore& store)
    : store_(store), log_path_(audit_path(store.dir())), clock_([] { return static_cast<std::int64_t>(std::time(nullptr)); }) {
  std::ifstream in(log_path_);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::parse, log_path_.string() + ":" + std::to_string(n) + ": malformed event");
    events_.push_back(std::move(j));
  }
  state_ = replay(events_);
}

void AnnotationService::set_clock(std::function<std::int64_t()> clock) {
  std::lock_guard lock(mutex_);
  clock_ = std::move(clock);
}

std::int64_t AnnotationService::now() const { return clock_(); }

void AnnotationService::apply(std::map<std::string, PhaseView>& state, const json& e) {
  const std::string type = e.at("event").get<std::string>();
  if (type == "phase_created") {
    PhaseView v;
    v.config = config_from_json(e.at("phase"));
    refresh(v);
    state[v.config.id] = std::move(v);
    return;
  }
  auto it = state.find(e.at("phase_id").get<std::string>());
  if (it == state.end()) fail(ErrorCode::integrity, "audit log references unknown phase");
  PhaseView& v = it->second;
  if (type == "verdict") {
    v.verdicts[{e.at("post_id").get<std::string>(), e.at("rater_id").get<std::string>()}] = verdict_of(e.at("verdict"));
  } else if (type == "consensus") {
    v.consensus[e.at("post_id").get<std::string>()] = verdict_of(e.at("verdict"));
  } else {
    fail(ErrorCode::integrity, "audit log has unknown event '" + type + "'");
  }
  refresh(v);
}

std::map<std::string, PhaseView> AnnotationService::replay(std::span<const json> events) {
  std::map<std::string, PhaseView> state;
  for (const auto& e : events) apply(state, e);
  return state;
}

void AnnotationService::append(json event) {
  if (!store_.writable()) fail(ErrorCode::permission, "annotation changes need a writable store");
  std::ofstream out(log_path_, std::ios::app | std::ios::binary);
  out << event.dump() << '\n';
  out.flush();
  if (!out) fail(ErrorCode::io, "cannot append to " + log_path_.string());
  apply(state_, event);
  events_.push_back(std::move(event));
}

const PhaseView& AnnotationService::find(const std::string& id) const {
  const auto it = state_.find(id);
  if (it == state_.end()) fail(ErrorCode::not_found, "no phase '" + id + "'");
  return it->second;
}

void AnnotationService::create_phase(const PhaseConfig& config) {
  std::lock_guard lock(mutex_);
  if (config.id.empty()) fail(ErrorCode::parameter, "phase id is empty");
  if (state_.count(config.id)) fail(ErrorCode::conflict, "phase '" + config.id + "' already exists");
  if (config.samples.empty()) fail(ErrorCode::parameter, "phase has no samples");
  if (config.coders.empty()) fail(ErrorCode::parameter, "phase has no coders");
  if (config.kind == CodingPhase::external) fail(ErrorCode::parameter, "phase kind must be pilot, consolidation or conclusion");
  if (std::set<std::string>(config.samples.begin(), config.samples.end()).size() != config.samples.size())
    fail(ErrorCode::parameter, "phase samples repeat");
  for (const auto& s : config.samples)
    if (!store_.has_document(s)) fail(ErrorCode::not_found, "sample '" + s + "' is not in the store");
  if (!config.groups.empty()) {
    for (const auto& c : config.coders)
      if (!config.groups.count(c)) fail(ErrorCode::parameter, "coder '" + c + "' has no group");
  }
  append(json{{"event", "phase_created"}, {"phase", config_json(config)}, {"ts", now()}});
}

std::vector<PhaseView> AnnotationService::phases() const {
  std::lock_guard lock(mutex_);
  std::vector<PhaseView> out;
  for (const auto& [id, v] : state_) out.push_back(v);
  return out;
}

PhaseView AnnotationService::phase(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return find(id);
}

namespace {

std::string rater_of(const PhaseView& v, const std::string& coder_id) {
  if (std::find(v.config.coders.begin(), v.config.coders.end(), coder_id) == v.config.coders.end())
    fail(ErrorCode::auth, "coder '" + coder_id + "' is not assigned to phase '" + v.config.id + "'");
  return v.config.groups.empty() ? coder_id : v.config.groups.at(coder_id);
}

}  // namespace

std::vector<Document> AnnotationService::next_batch(const std::string& coder_id, const std::string& phase_id) const {
  std::lock_guard lock(mutex_);
  const PhaseView& v = find(phase_id);
  const std::string rater = rater_of(v, coder_id);
  if (v.status == PhaseStatus::closed) fail(ErrorCode::state, "phase '" + phase_id + "' is closed");
  std::vector<Document> out;
  for (const auto& s : v.config.samples)
    if (!v.verdicts.count({s, rater})) out.push_back(store_.get_document(s));
  return out;
}

AnnotationRecord AnnotationService::submit_verdict(const std::string& coder_id, const std::string& post_id, Verdict verdict,
                                                   const std::string& phase_id, std::optional<int> round) {
  std::lock_guard lock(mutex_);
  const PhaseView& v = find(phase_id);
  const std::string rater = rater_of(v, coder_id);
  if (v.status == PhaseStatus::closed) fail(ErrorCode::state, "phase '" + phase_id + "' is closed");
  if (std::find(v.config.samples.begin(), v.config.samples.end(), post_id) == v.config.samples.end())
    fail(ErrorCode::domain, "sample '" + post_id + "' is not in phase '" + phase_id + "'");
  if (round && *round != v.config.round)
    fail(ErrorCode::domain, "phase '" + phase_id + "' is in round " + std::to_string(v.config.round));

  AnnotationRecord rec{post_id, coder_id, rater, verdict, phase_id, v.config.kind, v.config.round, now()};
  append(json{{"event", "verdict"},
              {"phase_id", phase_id},
              {"post_id", post_id},
              {"coder_id", coder_id},
              {"rater_id", rater},
              {"verdict", to_string(verdict)},
              {"phase", to_string(rec.phase)},
              {"round", rec.round},
              {"ts", rec.timestamp}});

  const PhaseView& after = find(phase_id);
  if (after.config.auto_consensus && !after.consensus.count(post_id)) {
    const auto raters = after.config.raters();
    if (fully_labeled(after, post_id, raters)) {
      const Verdict first = after.verdicts.at({post_id, raters.front()});
      const bool unanimous = std::all_of(raters.begin(), raters.end(),
                                         [&](const auto& r) { return after.verdicts.at({post_id, r}) == first; });
      if (unanimous) {
        store_.put_label({post_id, to_label(first), LabelOrigin::consensus, after.config.kind}, true);
        append(json{{"event", "consensus"},
                    {"phase_id", phase_id},
                    {"post_id", post_id},
                    {"verdict", to_string(first)},
                    {"by", "auto"},
                    {"override", false},
                    {"ts", now()}});
      }
    }
  }
  return rec;
}

std::vector<DisagreementItem> AnnotationService::disagreement_queue(const std::string& phase_id, bool include_resolved) const {
  std::lock_guard lock(mutex_);
  const PhaseView& v = find(phase_id);
  const auto raters = v.config.raters();
  std::vector<DisagreementItem> out;
  for (const auto& s : v.config.samples) {
    if (!fully_labeled(v, s, raters)) continue;
    DisagreementItem item;
    item.post_id = s;
    for (const auto& r : raters) {
      const Verdict verdict = v.verdicts.at({s, r});
      item.by_rater[r] = verdict;
      (verdict == Verdict::Yes ? item.yes : item.no) += 1;
    }
    if (item.yes == 0 || item.no == 0) continue;
    if (const auto c = v.consensus.find(s); c != v.consensus.end()) {
      if (!include_resolved) continue;
      item.consensus = c->second;
    }
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<std::string> AnnotationService::unanimous(const std::string& phase_id) const {
  std::lock_guard lock(mutex_);
  const PhaseView& v = find(phase_id);
  const auto raters = v.config.raters();
  std::vector<std::string> out;
  for (const auto& s : v.config.samples) {
    if (!fully_labeled(v, s, raters)) continue;
    const Verdict first = v.verdicts.at({s, raters.front()});
    if (std::all_of(raters.begin(), raters.end(), [&](const auto& r) { return v.verdicts.at({s, r}) == first; }))
      out.push_back(s);
  }
  return out;
}

void AnnotationService::record_consensus(const std::string& post_id, Verdict verdict, const std::string& phase_id,
                                         bool override, const std::string& by) {
  std::lock_guard lock(mutex_);
  const PhaseView& v = find(phase_id);
  if (std::find(v.config.samples.begin(), v.config.samples.end(), post_id) == v.config.samples.end())
    fail(ErrorCode::domain, "sample '" + post_id + "' is not in phase '" + phase_id + "'");
  if (v.consensus.count(post_id) && !override)
    fail(ErrorCode::conflict, "consensus for '" + post_id + "' already recorded in phase '" + phase_id + "'");
  store_.put_label({post_id, to_label(verdict), LabelOrigin::consensus, v.config.kind}, true);
  append(json{{"event", "consensus"},
              {"phase_id", phase_id},
              {"post_id", post_id},
              {"verdict", to_string(verdict)},
              {"by", by},
              {"override", override},
              {"ts", now()}});
}

AgreementReport AnnotationService::agreement(const std::string& phase_id) const {
  std::lock_guard lock(mutex_);
  const PhaseView& v = find(phase_id);
  AgreementReport rep;
  rep.phase_id = phase_id;
  rep.raters = v.config.raters();
  rep.samples = v.config.samples.size();
  rep.fully_labeled = v.fully_labeled;
  rep.consensus = v.consensus.size();
  rep.status = v.status;
  const std::size_t m = rep.raters.size();
  rep.pairwise.assign(m, std::vector<std::optional<KappaResult>>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<Verdict> a, b;
      for (const auto& s : v.config.samples) {
        const auto x = v.verdicts.find({s, rep.raters[i]});
        const auto y = v.verdicts.find({s, rep.raters[j]});
        if (x == v.verdicts.end() || y == v.verdicts.end()) continue;
        a.push_back(x->second);
        b.push_back(y->second);
      }
      if (a.empty()) continue;
      try {
        rep.pairwise[i][j] = cohen_kappa(a, b);
      } catch (const Error&) {
      }
    }
  }

  if (m >= 2) {
    std::vector<std::array<int, 2>> rows;
    for (const auto& s : v.config.samples) {
      if (!fully_labeled(v, s, rep.raters)) continue;
      std::array<int, 2> counts{0, 0};
      for (const auto& r : rep.raters) ++counts[v.verdicts.at({s, r}) == Verdict::Yes ? 0 : 1];
      rows.push_back(counts);
    }
    if (rows.empty()) {
      rep.fleiss_note = "no fully labeled samples";
    } else {
      Eigen::MatrixXi counts(static_cast<Eigen::Index>(rows.size()), 2);
      for (std::size_t r = 0; r < rows.size(); ++r) counts.row(static_cast<Eigen::Index>(r)) << rows[r][0], rows[r][1];
      try {
        rep.fleiss = fleiss_kappa(counts, static_cast<int>(m));
      } catch (const Error& e) {
        rep.fleiss_note = e.what();
      }
    }
  } else {
    rep.fleiss_note = "needs at least two raters";
  }

  for (const auto& r : rep.raters) {
    RaterProgress p;
    p.rater = r;
    p.total = v.config.samples.size();
    std::size_t agree = 0;
    for (const auto& s : v.config.samples) {
      const auto x = v.verdicts.find({s, r});
      if (x == v.verdicts.end()) continue;
      ++p.done;
      if (const auto c = v.consensus.find(s); c != v.consensus.end()) {
        ++p.consensus_items;
        agree += c->second == x->second ? 1 : 0;
      }
    }
    if (p.consensus_items) p.agreement_with_consensus = static_cast<double>(agree) / static_cast<double>(p.consensus_items);
    rep.progress.push_back(p);
  }
  return rep;
}

std::vector<json> AnnotationService::audit_events(std::optional<std::string> phase_id) const {
  std::lock_guard lock(mutex_);
  std::vector<json> out;
  for (const auto& e : events_) {
    if (phase_id) {
      const std::string id = e.contains("phase_id") ? e["phase_id"].get<std::string>() : e["phase"]["id"].get<std::string>();
      if (id != *phase_id) continue;
    }
    out.push_back(e);
  }
  return out;
}

namespace {

ordered_json kappa_json(const KappaResult& k) {
  return ordered_json{{"kappa", k.kappa},
                      {"observed_agreement", k.observed_agreement},
                      {"expected_agreement", k.expected_agreement},
                      {"n_items", k.n_items}};
}

}  // namespace

ordered_json AgreementReport::to_json() const {
  ordered_json j;
  j["phase"] = phase_id;
  j["status"] = to_string(status);
  j["raters"] = raters;
  ordered_json matrix = ordered_json::array();
  for (const auto& row : pairwise) {
    ordered_json r = ordered_json::array();
    for (const auto& cell : row) r.push_back(cell ? kappa_json(*cell) : ordered_json(nullptr));
    matrix.push_back(r);
  }
  j["cohen"] = matrix;
  j["fleiss"] = fleiss ? kappa_json(*fleiss) : ordered_json(nullptr);
  if (!fleiss_note.empty()) j["fleiss_note"] = fleiss_note;
  ordered_json prog = ordered_json::array();
  for (const auto& p : progress) {
    prog.push_back({{"rater", p.rater},
                    {"done", p.done},
                    {"total", p.total},
                    {"consensus_items", p.consensus_items},
                    {"agreement_with_consensus",
                     p.agreement_with_consensus ? ordered_json(*p.agreement_with_consensus) : ordered_json(nullptr)}});
  }
  j["progress"] = prog;
  j["samples"] = samples;
  j["fully_labeled"] = fully_labeled;
  j["consensus"] = consensus;
  return j;
}

}  // namespace ctn
