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


// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctn/analysis.hpp"
#include "ctn/classifiers.hpp"
#include "ctn/cli.hpp"
#include "ctn/corpus.hpp"
#include "ctn/embedding.hpp"
#include "ctn/llm.hpp"
#include "ctn/mock_server.hpp"
#include "ctn/random.hpp"
#include "ctn/sampling.hpp"
#include "ctn/stats.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace ctn;
using nlohmann::json;

namespace {

// pinned tolerances and budgets
constexpr double kBoundTol = 0.001;
constexpr double kFleissTol = 1e-12;
constexpr double kNormalApproxTol = 0.02;
constexpr double kLrGradTol = 1e-5;
constexpr double kSvmGradTol = 1e-4;
constexpr double kKinkGuard = 1e-3;
constexpr double kEngagementAlpha = 1e-3;
constexpr double kBoundsBudgetS = 1.0;
constexpr double kStatsBudgetS = 30.0;
constexpr double kPipelineBudgetS = 60.0;

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> notes;  // extra lines printed under the verdict

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// --- bounds -----------------------------------------------------------------

struct PublishedRow {
  const char* name;
  double ratio, upper, lower;
};

const PublishedRow kTable[] = {
    {"conspiracy", 0.312, 0.422, 0.218},        {"TruthLeaks", 0.279, 0.377, 0.195},
    {"TopConspiracy", 0.405, 0.547, 0.284},     {"conspiracy_commons", 0.321, 0.434, 0.225},
    {"climateskeptics", 0.235, 0.318, 0.165},   {"conspiracytheories", 0.337, 0.455, 0.236},
    {"DescentIntoTyranny", 0.273, 0.369, 0.191}, {"ConspiracyII", 0.355, 0.480, 0.249},
    {"FringeTheory", 0.200, 0.270, 0.140},      {"conspiracyundone", 0.419, 0.566, 0.293},
    {"C_S_T", 0.318, 0.430, 0.223},             {"1984isreality", 0.465, 0.628, 0.326},
};
const PublishedRow kOverall{"Overall", 0.313, 0.423, 0.219};
constexpr double kP = 0.700, kR = 0.738;

Outcome bounds_table() {
  Outcome o;
  int within = 0;
  double worst = 0;
  for (const auto& row : kTable) {
    const auto b = prevalence_bounds(row.ratio, kP, kR);
    const double du = b.upper - row.upper, dl = b.lower - row.lower;
    worst = std::max({worst, std::abs(du), std::abs(dl)});
    within += (std::abs(du) <= kBoundTol) + (std::abs(dl) <= kBoundTol);
    if (std::abs(du) > kBoundTol || std::abs(dl) > kBoundTol)
      o.notes.push_back(std::string(row.name) + ": upper " + fmt("%.4f", b.upper) + " vs " + fmt("%.3f", row.upper) +
                        " (" + fmt("%+.4f", du) + "), lower " + fmt("%.4f", b.lower) + " vs " + fmt("%.3f", row.lower) +
                        " (" + fmt("%+.4f", dl) + ")");
  }
  const auto ov = prevalence_bounds(kOverall.ratio, kP, kR);
  const bool overall_ok = fmt("%.3f", ov.upper) == fmt("%.3f", kOverall.upper) &&
                          fmt("%.3f", ov.lower) == fmt("%.3f", kOverall.lower);
  if (!overall_ok)
    o.notes.push_back("Overall: " + fmt("%.3f", ov.upper) + "/" + fmt("%.3f", ov.lower) + " vs " +
                      fmt("%.3f", kOverall.upper) + "/" + fmt("%.3f", kOverall.lower));
  o.require(within == 24, std::to_string(within) + "/24 bounds within " + fmt("%.3f", kBoundTol));
  o.require(overall_ok, "Overall row differs at 3 decimals");
  if (o.pass) o.detail = "24/24 bounds within " + fmt("%.3f", kBoundTol) + ", Overall exact";
  o.detail += ", max residual " + fmt("%.4f", worst);

  // informational: recall range consistent with every published upper bound after rounding
  double lo = 0, hi = 1;
  for (const auto& row : kTable) {
    lo = std::max(lo, row.ratio / (row.upper + 0.0005));
    hi = std::min(hi, row.ratio / (row.upper - 0.0005));
  }
  lo = std::max(lo, kOverall.ratio / (kOverall.upper + 0.0005));
  hi = std::min(hi, kOverall.ratio / (kOverall.upper - 0.0005));
  o.notes.push_back("info: recall values consistent with all published upper bounds: " +
                    (lo <= hi ? "[" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "]" : std::string("none")));
  return o;
}

// --- prompts ----------------------------------------------------------------

Outcome prompt_goldens() {
  Outcome o;
  const std::string q = "Decide whether the following text describes a conspiracy theory or not (yes/no).";
  const std::map<PromptStrategy, std::string> golden{
      {PromptStrategy::Simple, q + " \"T\""},
      {PromptStrategy::Justification, q + " Justify your answer. \"T\""},
      {PromptStrategy::SBS,
       q + " First, extract the narrative or claim from the text. Second, decide if the claim is a known conspiracy "
           "theory or suggests a hidden plan. Third, decide if the text agrees with or supports the conspiracy theory "
           "or plan. Fourth, answer the question (yes/no). \"T\""}};
  for (const auto& [strategy, want] : golden) {
    PromptSpec s;
    s.strategy = strategy;
    s.target_text = "T";
    const auto m = render_prompt(s);
    o.require(m.size() == 1 && m[0].role == "user" && m[0].content == want,
              std::string(to_string(strategy)) + " template differs");
  }
  for (int n : {1, 3, 5}) {
    PromptSpec s;
    s.strategy = PromptStrategy::SBS;
    s.n_shots = n;
    s.target_text = "T";
    s.seed = static_cast<std::uint64_t>(n);
    for (int i = 0; i < n; ++i) {
      s.examples.push_back({"c" + std::to_string(i), Label::CT});
      s.examples.push_back({"n" + std::to_string(i), Label::NonCT});
    }
    const auto m = render_prompt(s);
    std::size_t demo_users = 0, answers = 0;
    for (std::size_t i = 0; i + 1 < m.size(); ++i) {
      if (m[i].role == "user") ++demo_users;
      if (m[i].role == "assistant") ++answers;
    }
    o.require(demo_users == static_cast<std::size_t>(2 * n) && answers == static_cast<std::size_t>(2 * n) &&
                  m.back().content == golden.at(PromptStrategy::SBS),
              std::to_string(n) + "-shot prompt has the wrong number of example turns");
  }
  if (o.pass) o.detail = "3 templates byte-exact, 2n example turns for n in {1,3,5}";
  return o;
}

// --- statistics -------------------------------------------------------------

long double fleiss_reference(const Eigen::MatrixXi& m, int n) {
  const long double N = m.rows();
  long double P_bar = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    long double s = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += static_cast<long double>(m(i, j)) * (m(i, j) - 1);
    P_bar += s / (static_cast<long double>(n) * (n - 1));
  }
  P_bar /= N;
  long double P_e = 0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    long double col = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) col += m(i, j);
    P_e += (col / (N * n)) * (col / (N * n));
  }
  return (P_bar - P_e) / (1 - P_e);
}

double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double s = 0;
  for (double p : pos)
    for (double q : neg) s += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
  return s / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double enumerate_u_p(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> pool(x);
  pool.insert(pool.end(), y.begin(), y.end());
  const std::size_t n = pool.size(), n1 = x.size();
  auto u_of = [&](const std::vector<bool>& in_x) {
    long twice = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (in_x[i] && !in_x[j]) twice += pool[i] > pool[j] ? 2 : (pool[i] == pool[j] ? 1 : 0);
    return twice;
  };
  std::vector<bool> observed(n, false);
  std::fill(observed.begin(), observed.begin() + static_cast<long>(n1), true);
  const long u_obs = u_of(observed);
  std::vector<bool> sel(n, false);
  std::fill(sel.end() - static_cast<long>(n1), sel.end(), true);
  unsigned long long le = 0, ge = 0, total = 0;
  do {
    const long u = u_of(sel);
    ++total;
    le += u <= u_obs;
    ge += u >= u_obs;
  } while (std::next_permutation(sel.begin(), sel.end()));
  return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
}

Outcome statistical_oracles() {
  Outcome o;
  Rng rng(2024);
  int auc_ok = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> pos(1 + rng.bounded(25)), neg(1 + rng.bounded(25));
    const bool coarse = t % 2 == 0;
    for (auto& v : pos) v = coarse ? static_cast<double>(rng.bounded(5)) : rng.uniform();
    for (auto& v : neg) v = coarse ? static_cast<double>(rng.bounded(5)) : rng.uniform();
    auc_ok += rank_auc(pos, neg) == brute_auc(pos, neg);
  }
  o.require(auc_ok == 1000, "rank_auc differs from pair counting on " + std::to_string(1000 - auc_ok) + " instances");

  int mw_cases = 0, mw_ok = 0;
  for (std::size_t n1 = 1; n1 <= 8; ++n1)
    for (std::size_t n2 = 1; n2 <= 8; ++n2)
      for (int rep = 0; rep < 2; ++rep) {
        std::vector<double> x(n1), y(n2);
        for (auto& v : x) v = rep ? static_cast<double>(rng.bounded(4)) : rng.uniform();
        for (auto& v : y) v = rep ? static_cast<double>(rng.bounded(4)) : rng.uniform();
        const auto r = mann_whitney_u(x, y);
        ++mw_cases;
        mw_ok += r.method == UTestMethod::exact && r.p_two_sided == enumerate_u_p(x, y);
      }
  o.require(mw_ok == mw_cases, "exact U p differs from enumeration");

  double worst_normal = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n1 = 15 + rng.bounded(6), n2 = 15 + rng.bounded(6);
    std::vector<double> x(n1), y(n2);
    const double shift = rng.uniform() * 0.6;
    for (auto& v : x) v = rng.uniform() + shift;
    for (auto& v : y) v = rng.uniform();
    UTestOptions exact, approx;
    exact.exact_cap = 1000;
    approx.exact_cap = 0;
    worst_normal = std::max(worst_normal, std::abs(mann_whitney_u(x, y, exact).p_two_sided -
                                                   mann_whitney_u(x, y, approx).p_two_sided));
  }
  o.require(worst_normal < kNormalApproxTol, "normal approximation off by " + fmt("%.4f", worst_normal));

  // 20 yes-yes, 20 no-no, 5 yes-no, 5 no-yes
  std::vector<Verdict> a, b;
  for (int i = 0; i < 20; ++i) a.push_back(Verdict::Yes), b.push_back(Verdict::Yes);
  for (int i = 0; i < 20; ++i) a.push_back(Verdict::No), b.push_back(Verdict::No);
  for (int i = 0; i < 5; ++i) a.push_back(Verdict::Yes), b.push_back(Verdict::No);
  for (int i = 0; i < 5; ++i) a.push_back(Verdict::No), b.push_back(Verdict::Yes);
  const auto k = cohen_kappa(a, b);
  o.require(std::abs(k.kappa - 0.6) < 1e-12 && std::abs(k.observed_agreement - 0.8) < 1e-12 &&
                std::abs(k.expected_agreement - 0.5) < 1e-12,
            "Cohen's kappa fixture gives " + fmt("%.6f", k.kappa));

  double worst_fleiss = 0;
  for (int checked = 0; checked < 50;) {
    const int items = 2 + static_cast<int>(rng.bounded(12));
    const int cats = 2 + static_cast<int>(rng.bounded(3));
    const int raters = 2 + static_cast<int>(rng.bounded(6));
    Eigen::MatrixXi m = Eigen::MatrixXi::Zero(items, cats);
    for (int i = 0; i < items; ++i)
      for (int r = 0; r < raters; ++r) ++m(i, static_cast<Eigen::Index>(rng.bounded(static_cast<std::uint64_t>(cats))));
    if ((m.colwise().sum().array() == items * raters).any()) continue;
    worst_fleiss = std::max(worst_fleiss, std::abs(fleiss_kappa(m, raters).kappa -
                                                   static_cast<double>(fleiss_reference(m, raters))));
    ++checked;
  }
  o.require(worst_fleiss < kFleissTol, "Fleiss' kappa off by " + fmt("%.3g", worst_fleiss));
  if (o.pass)
    o.detail = "auc 1000/1000 exact, U exact " + std::to_string(mw_ok) + "/" + std::to_string(mw_cases) +
               ", normal max diff " + fmt("%.4f", worst_normal) + ", kappa 0.6, fleiss max diff " +
               fmt("%.2g", worst_fleiss);
  return o;
}

// --- gradients --------------------------------------------------------------

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform() * 2 - 1;
  return m;
}

std::vector<Label> random_labels(Rng& rng, int n) {
  std::vector<Label> y(static_cast<std::size_t>(n));
  for (auto& l : y) l = rng.bounded(2) ? Label::CT : Label::NonCT;
  y[0] = Label::CT;
  y[1] = Label::NonCT;
  return y;
}

template <typename F>
double max_rel_error(F f, const Eigen::VectorXd& w, double b, const Eigen::VectorXd& gw, double gb, double h) {
  const auto rel = [](double x, double y) { return std::abs(x - y) / std::max(1e-6, std::abs(x) + std::abs(y)); };
  double worst = 0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    Eigen::VectorXd wp = w, wm = w;
    wp(j) += h;
    wm(j) -= h;
    worst = std::max(worst, rel((f(wp, b) - f(wm, b)) / (2 * h), gw(j)));
  }
  return std::max(worst, rel((f(w, b + h) - f(w, b - h)) / (2 * h), gb));
}

Outcome gradient_checks() {
  Outcome o;
  Rng rng(77);
  double worst_lr = 0, worst_svm = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 5 + static_cast<int>(rng.bounded(30)), d = 1 + static_cast<int>(rng.bounded(8));
    const Eigen::MatrixXd X = random_matrix(rng, n, d) * 3;
    const Eigen::VectorXd targets = label_targets(random_labels(rng, n));
    const Eigen::VectorXd w = random_matrix(rng, d, 1);
    const double b = rng.uniform() - 0.5, l2 = rng.uniform() * 0.1;
    const auto obj = logistic_objective(X, targets, w, b, l2);
    worst_lr = std::max(worst_lr, max_rel_error([&](const Eigen::VectorXd& ww, double bb) {
                          return logistic_objective(X, targets, ww, bb, l2).loss;
                        }, w, b, obj.grad_w, obj.grad_b, 1e-6));
  }
  for (int checked = 0; checked < 100;) {
    const int n = 5 + static_cast<int>(rng.bounded(30)), d = 1 + static_cast<int>(rng.bounded(8));
    const Eigen::MatrixXd X = random_matrix(rng, n, d) * 3;
    const Eigen::VectorXd signs = label_signs(random_labels(rng, n));
    const Eigen::VectorXd w = random_matrix(rng, d, 1);
    const double b = rng.uniform() - 0.5, lambda = rng.uniform() * 0.1;
    const Eigen::ArrayXd margin = signs.array() * ((X * w).array() + b);
    if (((margin - 1).abs() < kKinkGuard).any()) continue;
    ++checked;
    const auto obj = hinge_objective(X, signs, w, b, lambda);
    worst_svm = std::max(worst_svm, max_rel_error([&](const Eigen::VectorXd& ww, double bb) {
                           return hinge_objective(X, signs, ww, bb, lambda).loss;
                         }, w, b, obj.grad_w, obj.grad_b, 1e-5));
  }
  o.require(worst_lr < kLrGradTol, "LR gradient relative error " + fmt("%.3g", worst_lr));
  o.require(worst_svm < kSvmGradTol, "SVM gradient relative error " + fmt("%.3g", worst_svm));
  if (o.pass) o.detail = "max rel error LR " + fmt("%.2g", worst_lr) + ", SVM " + fmt("%.2g", worst_svm);
  return o;
}

// --- folds ------------------------------------------------------------------

Outcome fold_properties() {
  Outcome o;
  Rng rng(313);
  int bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const int k = 2 + static_cast<int>(rng.bounded(9));
    const std::size_t n_pos = static_cast<std::size_t>(k) + rng.bounded(60);
    const std::size_t n_neg = static_cast<std::size_t>(k) + rng.bounded(60);
    std::vector<LabeledSample> labels;
    std::vector<std::size_t> order(n_pos + n_neg);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 0; i < order.size(); ++i)
      labels.push_back({"id" + std::to_string(order[i]), i < n_pos ? Label::CT : Label::NonCT, LabelOrigin::import,
                        CodingPhase::external});
    const auto folds = make_stratified_folds(labels, k, rng.next());
    std::map<std::string, Label> truth;
    for (const auto& l : labels) truth[l.post_id] = l.label;
    std::set<std::string> seen;
    std::vector<int> pos(static_cast<std::size_t>(k)), neg(static_cast<std::size_t>(k));
    bool ok = folds.size() == labels.size();
    for (const auto& a : folds) {
      ok = ok && a.fold >= 0 && a.fold < k && seen.insert(a.post_id).second && truth.count(a.post_id);
      if (ok) (truth.at(a.post_id) == Label::CT ? pos : neg)[static_cast<std::size_t>(a.fold)]++;
    }
    ok = ok && seen.size() == truth.size();
    ok = ok && *std::max_element(pos.begin(), pos.end()) - *std::min_element(pos.begin(), pos.end()) <= 1;
    ok = ok && *std::max_element(neg.begin(), neg.end()) - *std::min_element(neg.begin(), neg.end()) <= 1;
    bad += !ok;
  }
  o.require(bad == 0, std::to_string(bad) + "/1000 label vectors violate the fold contract");
  if (o.pass) o.detail = "1000/1000 partitions, per-fold class deviation <= 1";
  return o;
}

// --- few-shot ---------------------------------------------------------------

Outcome few_shot_top_n() {
  Outcome o;
  Rng rng(909);
  int mismatches = 0;
  for (int t = 0; t < 500; ++t) {
    const int dim = 2 + static_cast<int>(rng.bounded(8));
    const std::size_t m = 3 + rng.bounded(40);
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(m), dim);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      if (i >= 2 && rng.bounded(4) == 0) {
        rows.row(r) = rows.row(static_cast<Eigen::Index>(rng.bounded(i))) * (rng.bounded(2) ? 2.0 : 1.0);
      } else {
        for (int j = 0; j < dim; ++j) rows(r, j) = rng.uniform() * 2 - 1;
      }
      ids.push_back("c" + std::to_string(rng.bounded(1000)) + "_" + std::to_string(i));
    }
    Eigen::RowVectorXd q(dim);
    for (int j = 0; j < dim; ++j) q(j) = rng.uniform() * 2 - 1;
    std::string qid = "query";
    if (rng.bounded(2)) {
      const auto k = rng.bounded(m);
      qid = ids[k];
      q = rows.row(static_cast<Eigen::Index>(k));
    }
    std::vector<std::pair<long double, std::string>> all;
    long double qq = 0;
    for (int j = 0; j < dim; ++j) qq += static_cast<long double>(q(j)) * q(j);
    for (std::size_t i = 0; i < m; ++i) {
      if (ids[i] == qid) continue;
      long double dot = 0, rr = 0;
      for (int j = 0; j < dim; ++j) {
        const long double v = rows(static_cast<Eigen::Index>(i), j);
        dot += v * q(j);
        rr += v * v;
      }
      all.push_back({dot / (std::sqrt(qq) * std::sqrt(rr)), ids[i]});
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const std::size_t n = 1 + rng.bounded(all.size());
    const auto got = top_n_by_cosine(qid, q, ids, rows, n);
    bool same = got.neighbors.size() == n;
    for (std::size_t i = 0; same && i < n; ++i) same = got.neighbors[i].id == all[i].second;
    mismatches += !same;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + "/500 pools differ from exhaustive ranking");
  if (o.pass) o.detail = "500/500 pools equal exhaustive ranking (similarity desc, id asc)";
  return o;
}

// --- pipeline ---------------------------------------------------------------

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), {"--log-level", "off"});
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> run_pipeline(const fs::path& root, Outcome& o) {
  std::map<std::string, std::string> reports;
  MockServerOptions so;
  so.embed_dim = 64;
  MockProviderServer server(so);
  const std::string url = "http://127.0.0.1:" + std::to_string(server.start());
  const std::string store = (root / "store").string();
  const fs::path rep = root / "reports";
  fs::create_directories(rep);
  const auto r = [&](const std::string& f) { return (rep / f).string(); };
  const auto step = [&](const std::string& name, std::vector<std::string> args) {
    if (!o.pass) return std::string();
    const auto res = cli_run(std::move(args));
    o.require(res.code == 0, name + " exited " + std::to_string(res.code) + ": " + res.err.substr(0, 200));
    return res.out;
  };

  step("ingest", {"ingest", "--store", store, ctn::testing::fixture("pipeline_posts.ndjson").string(), "--report",
                  r("ingest.json")});
  step("sample", {"sample", "--store", store, "-n", "40", "--seed", "7", "--out", r("sample.txt")});
  step("import-labels", {"import-labels", "--store", store, ctn::testing::fixture("pipeline_labels.csv").string()});
  reports["split.json"] = step("split", {"split", "--store", store, "-k", "5", "--seed", "11"});
  reports["embed.json"] = step("embed", {"embed", "--store", store, "--provider", "http", "--base-url", url, "--model",
                                         "mock-hash-bow", "--batch", "8"});
  step("train", {"train", "--store", store, "--model", "lr", "--out", (root / "models" / "lr.json").string()});
  step("eval", {"eval", "--store", store, "--split", "cv5", "--model", "lr", "--model", "svm", "--model", "knn",
                "--out", r("eval.json"), "--markdown", r("eval.md")});
  reports["classify.json"] = step("classify", {"classify", "--store", store, "--model-file",
                                               (root / "models" / "lr.json").string(), "--model-id", "lr", "--out",
                                               r("predictions.ndjson")});
  step("prompt-run", {"prompt-run", "--store", store, "--strategy", "sbs", "--shots", "3", "--runs", "2", "--split",
                      "cv5", "--provider", "http", "--base-url", url, "--parallel", "4"});
  step("prompt-report", {"prompt-report", "--store", store, "--out", r("prompt.json"), "--markdown", r("prompt.md")});

  double precision = 0, recall = 0;
  if (o.pass) {
    const auto eval = json::parse(ctn::testing::slurp(rep / "eval.json"));
    precision = eval[0]["precision"]["mean"].get<double>();
    recall = eval[0]["recall"]["mean"].get<double>();
    o.require(precision > 0 && recall > 0, "lr precision/recall are zero on the fixture");
  }
  step("prevalence", {"prevalence", "--store", store, "--model-id", "lr", "--precision", fmt("%.17g", precision),
                      "--recall", fmt("%.17g", recall), "--out", r("prevalence.json"), "--markdown",
                      r("prevalence.md")});
  step("engagement", {"engagement", "--store", store, "--model-id", "lr", "--out", r("engagement.json"), "--ecdf",
                      r("engagement.csv")});
  server.stop();
  if (!o.pass) return reports;
  for (const auto& entry : fs::directory_iterator(rep))
    reports[entry.path().filename().string()] = ctn::testing::slurp(entry.path());
  return reports;
}

Outcome pipeline_smoke() {
  Outcome o;
  ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  ctn::testing::TempDir a("accept-a"), b("accept-b");
  const auto ra = run_pipeline(a.path(), o);
  const auto rb = run_pipeline(b.path(), o);
  ::unsetenv("SOURCE_DATE_EPOCH");
  if (!o.pass) return o;
  o.require(ra.size() == rb.size() && ra.size() >= 12, "report sets differ");
  std::size_t bytes = 0;
  for (const auto& [name, content] : ra) {
    const auto it = rb.find(name);
    o.require(it != rb.end() && it->second == content, name + " differs between runs");
    o.require(!content.empty(), name + " is empty");
    bytes += content.size();
  }
  const auto prompt = json::parse(ra.at("prompt.json"));
  o.require(!prompt.empty(), "prompt report has no groups");
  const auto eng = json::parse(ra.at("engagement.json"));
  o.require(eng.contains("measures"), "engagement report lacks measures");
  if (o.pass) o.detail = std::to_string(ra.size()) + " reports bit-identical across two runs (" + std::to_string(bytes) + " bytes)";
  return o;
}

// --- filtering --------------------------------------------------------------

Outcome filtering_semantics() {
  Outcome o;
  IngestReport rep;
  const auto docs = ingest_files({ctn::testing::fixture("filter_posts.ndjson")}, {}, rep);
  std::set<std::string> ids;
  for (const auto& d : docs) ids.insert(d.post_id);
  // hand count: f02 f03 f07 removal bodies, f04 deleted author, f05 f09 f11 f12 under 30 characters
  o.require(rep.full_count == 12, "full count " + std::to_string(rep.full_count));
  o.require(rep.clean_count == 8, "clean count " + std::to_string(rep.clean_count));
  o.require(rep.too_short == 4, "too-short count " + std::to_string(rep.too_short));
  o.require(ids == std::set<std::string>{"f01", "f06", "f08", "f10"}, "kept set differs");
  o.require(rep.per_subreddit.at("conspiracy").full == 6 && rep.per_subreddit.at("conspiracy").clean == 3 &&
                rep.per_subreddit.at("news").full == 6 && rep.per_subreddit.at("news").clean == 5,
            "per-subreddit counts differ");
  if (o.pass) o.detail = "full 12, clean 8, too short 4, kept {f01,f06,f08,f10}";
  return o;
}

// --- engagement -------------------------------------------------------------

Outcome engagement_direction() {
  Outcome o;
  Rng rng(4242);
  std::vector<EngagementSample> s;
  for (int i = 0; i < 40; ++i)
    s.push_back({Label::CT, 15.0 + static_cast<double>(rng.bounded(40)), 30.0 + static_cast<double>(rng.bounded(200))});
  for (int i = 0; i < 60; ++i)
    s.push_back({Label::NonCT, static_cast<double>(rng.bounded(25)), static_cast<double>(rng.bounded(120))});
  const auto rep = engagement_compare(s);
  for (const auto& m : rep.measures) {
    o.require(m.test.p_two_sided < kEngagementAlpha, m.measure + " p = " + fmt("%.3g", m.test.p_two_sided));
    o.require(m.verdict == "CT stochastically greater", m.measure + " direction: " + m.verdict);
  }
  for (auto& x : s) x.group = x.group == Label::CT ? Label::NonCT : Label::CT;
  const auto flipped = engagement_compare(s);
  for (const auto& m : flipped.measures)
    o.require(m.verdict == "non-CT stochastically greater", "swapped groups keep direction for " + m.measure);
  if (o.pass)
    o.detail = "comments p " + fmt("%.2g", rep.measures[0].test.p_two_sided) + ", karma p " +
               fmt("%.2g", rep.measures[1].test.p_two_sided) + ", CT greater (" +
               std::string(to_string(rep.measures[0].test.method)) + ")";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<Outcome()> fn;
    double budget_s;
  };
  const std::vector<Criterion> criteria{
      {"bounds-table", bounds_table, kBoundsBudgetS},
      {"prompt-goldens", prompt_goldens, 0},
      {"statistical-oracles", statistical_oracles, kStatsBudgetS},
      {"gradient-checks", gradient_checks, 0},
      {"fold-properties", fold_properties, 0},
      {"few-shot-top-n", few_shot_top_n, 0},
      {"pipeline-smoke", pipeline_smoke, kPipelineBudgetS},
      {"filtering-semantics", filtering_semantics, 0},
      {"engagement-direction", engagement_direction, 0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.detail += ", over the " + fmt("%.0f", c.budget_s) + " s budget";
      o.pass = false;
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " [" << fmt("%.2f", secs) << " s]\n";
    for (const auto& n : o.notes) std::cout << "    " << n << "\n";
    failed += !o.pass;
  }
  std::cout << (failed ? std::to_string(failed) + " of " : "all ") << criteria.size() << " criteria "
            << (failed ? "failed" : "passed") << "\n";
  return failed ? 1 : 0;
}
