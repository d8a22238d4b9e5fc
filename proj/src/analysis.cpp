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

#include "ctn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

#include "ctn/error.hpp"

namespace ctn {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

PrevalenceRow make_row(std::string name, std::size_t n, std::size_t positives, double precision, double recall) {
  PrevalenceRow row;
  row.subreddit = std::move(name);
  row.n_posts = n;
  row.positives = positives;
  row.pos_ratio = n ? static_cast<double>(positives) / static_cast<double>(n) : 0.0;
  const auto b = prevalence_bounds(row.pos_ratio, precision, recall);
  row.upper_bound = b.upper;
  row.lower_bound = b.lower;
  return row;
}

ordered_json row_json(const PrevalenceRow& r) {
  return ordered_json{{"subreddit", r.subreddit}, {"n_posts", r.n_posts},         {"positives", r.positives},
                      {"pos_ratio", r.pos_ratio}, {"upper_bound", r.upper_bound}, {"lower_bound", r.lower_bound}};
}

}  // namespace

PrevalenceBounds prevalence_bounds(double pos_ratio, double precision, double recall) {
  if (!(recall > 0.0)) fail(ErrorCode::undefined, "prevalence bounds: recall must be > 0");
  if (recall > 1.0 || !(precision > 0.0) || precision > 1.0)
    fail(ErrorCode::domain, "prevalence bounds: precision and recall must lie in (0, 1]");
  if (pos_ratio < 0.0 || pos_ratio > 1.0) fail(ErrorCode::domain, "prevalence bounds: ratio outside [0, 1]");
  return {std::min(1.0, pos_ratio / recall), pos_ratio * precision};
}

std::optional<Label> predicted_label(const PredictionRecord& r) {
  if (r.label) return r.label;
  if (r.score) return *r.score > 0.5 ? Label::CT : Label::NonCT;
  return std::nullopt;
}

PrevalenceTable prevalence(std::span<const PredictionRecord> predictions, double precision, double recall) {
  prevalence_bounds(0.0, precision, recall);  // validates P and R
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // n, positives
  std::size_t total = 0, positives = 0;
  for (const auto& r : predictions) {
    const auto label = predicted_label(r);
    if (!label) fail(ErrorCode::integrity, "prediction for " + r.post_id + " has neither label nor score");
    if (r.subreddit.empty()) fail(ErrorCode::integrity, "prediction for " + r.post_id + " lacks a subreddit");
    auto& c = counts[r.subreddit];
    ++c.first;
    ++total;
    if (*label == Label::CT) {
      ++c.second;
      ++positives;
    }
  }
  PrevalenceTable t;
  t.precision = precision;
  t.recall = recall;
  for (const auto& [sub, c] : counts) t.rows.push_back(make_row(sub, c.first, c.second, precision, recall));
  t.overall = make_row("Overall", total, positives, precision, recall);
  return t;
}

std::string PrevalenceTable::to_json() const {
  ordered_json j;
  j["precision"] = precision;
  j["recall"] = recall;
  ordered_json rs = ordered_json::array();
  for (const auto& r : rows) rs.push_back(row_json(r));
  j["rows"] = rs;
  j["overall"] = row_json(overall);
  return j.dump(2) + "\n";
}

std::string PrevalenceTable::to_markdown() const {
  std::string out = "| Subreddit | Posts | Pos. Ratio | Upper Bound | Lower Bound |\n|---|---:|---:|---:|---:|\n";
  const auto line = [&](const PrevalenceRow& r) {
    out += "| " + r.subreddit + " | " + std::to_string(r.n_posts) + " | " + fmt3(r.pos_ratio) + " | " +
           fmt3(r.upper_bound) + " | " + fmt3(r.lower_bound) + " |\n";
  };
  for (const auto& r : rows) line(r);
  line(overall);
  return out;
}

std::vector<EngagementSample> engagement_samples(std::span<const PredictionRecord> predictions) {
  std::vector<EngagementSample> out;
  out.reserve(predictions.size());
  for (const auto& r : predictions) {
    const auto label = predicted_label(r);
    if (!label) fail(ErrorCode::integrity, "prediction for " + r.post_id + " has neither label nor score");
    out.push_back({*label, static_cast<double>(r.num_comments), static_cast<double>(std::max<std::int64_t>(r.karma, 0))});
  }
  return out;
}

EngagementReport engagement_compare(std::span<const EngagementSample> samples, const UTestOptions& options) {
  std::vector<double> ct_comments, non_comments, ct_karma, non_karma;
  for (const auto& s : samples) {
    if (s.group == Label::CT) {
      ct_comments.push_back(s.comments);
      ct_karma.push_back(s.karma);
    } else {
      non_comments.push_back(s.comments);
      non_karma.push_back(s.karma);
    }
  }
  if (ct_comments.empty() || non_comments.empty())
    fail(ErrorCode::domain, "engagement_compare: both CT and non-CT groups must be non-empty");

  EngagementReport report;
  report.n_ct = ct_comments.size();
  report.n_non_ct = non_comments.size();
  const auto compare = [&](std::string name, const std::vector<double>& ct, const std::vector<double>& non) {
    const auto test = mann_whitney_u(ct, non, options);
    const double centre = static_cast<double>(test.n1) * static_cast<double>(test.n2) / 2.0;
    std::string verdict = test.u_statistic > centre   ? "CT stochastically greater"
                          : test.u_statistic < centre ? "non-CT stochastically greater"
                                                      : "no difference";
    report.measures.push_back({std::move(name), Ecdf(ct), Ecdf(non), test, std::move(verdict)});
  };
  compare("comments", ct_comments, non_comments);
  compare("karma", ct_karma, non_karma);
  return report;
}

std::string EngagementReport::to_json() const {
  ordered_json j;
  j["n_ct"] = n_ct;
  j["n_non_ct"] = n_non_ct;
  ordered_json ms = ordered_json::array();
  for (const auto& m : measures) {
    ms.push_back(ordered_json{{"measure", m.measure},
                              {"u_statistic", m.test.u_statistic},
                              {"n1", m.test.n1},
                              {"n2", m.test.n2},
                              {"p_two_sided", m.test.p_two_sided},
                              {"method", to_string(m.test.method)},
                              {"verdict", m.verdict}});
  }
  j["measures"] = ms;
  return j.dump(2) + "\n";
}

std::string EngagementReport::ecdf_csv() const {
  std::string out = "group,measure,x,F\n";
  for (const auto& m : measures) {
    for (const auto* side : {&m.ct, &m.non_ct}) {
      const char* group = side == &m.ct ? "CT" : "non-CT";
      for (std::size_t i = 0; i < side->support().size(); ++i)
        out += std::string(group) + "," + m.measure + "," + fmt_g(side->support()[i]) + "," +
               fmt_g(side->cumulative()[i]) + "\n";
    }
  }
  return out;
}

}  // namespace ctn
