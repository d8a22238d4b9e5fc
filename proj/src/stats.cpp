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

#include "ctn/stats.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ctn {

namespace {

KappaResult finish_kappa(double po, double pe, std::size_t n, const char* who) {
  KappaResult r;
  r.observed_agreement = po;
  r.expected_agreement = pe;
  r.n_items = n;
  if (pe >= 1.0) {
    if (po >= 1.0) {
      r.kappa = 1.0;
      return r;
    }
    fail(ErrorCode::undefined, std::string(who) + ": expected agreement is 1");
  }
  r.kappa = (po - pe) / (1.0 - pe);
  return r;
}

}  // namespace

KappaResult cohen_kappa(std::span<const Verdict> a, std::span<const Verdict> b) {
  if (a.size() != b.size())
    fail(ErrorCode::dimension, "cohen_kappa: vectors differ in length (" + std::to_string(a.size()) +
                                   " vs " + std::to_string(b.size()) + ")");
  if (a.empty()) fail(ErrorCode::dimension, "cohen_kappa: no items");

  // 2x2 contingency table, index [a][b]
  double table[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < a.size(); ++i) table[static_cast<int>(a[i])][static_cast<int>(b[i])] += 1;
  const double n = static_cast<double>(a.size());
  const double po = (table[0][0] + table[1][1]) / n;
  const double a_yes = (table[1][0] + table[1][1]) / n;
  const double b_yes = (table[0][1] + table[1][1]) / n;
  const double pe = a_yes * b_yes + (1.0 - a_yes) * (1.0 - b_yes);
  if (pe >= 1.0 && po >= 1.0) return finish_kappa(1.0, 1.0, a.size(), "cohen_kappa");
  return finish_kappa(po, pe, a.size(), "cohen_kappa");
}

KappaResult fleiss_kappa(const Eigen::Ref<const Eigen::MatrixXi>& counts, int raters) {
  const Eigen::Index items = counts.rows();
  if (items == 0 || counts.cols() == 0) fail(ErrorCode::dimension, "fleiss_kappa: empty rating matrix");
  if (raters < 2) fail(ErrorCode::dimension, "fleiss_kappa: need at least two raters");
  if ((counts.array() < 0).any()) fail(ErrorCode::dimension, "fleiss_kappa: negative count");
  for (Eigen::Index i = 0; i < items; ++i) {
    if (counts.row(i).sum() != raters)
      fail(ErrorCode::dimension, "fleiss_kappa: row " + std::to_string(i) + " sums to " +
                                     std::to_string(counts.row(i).sum()) + ", expected " +
                                     std::to_string(raters));
  }
  const Eigen::MatrixXd c = counts.cast<double>();
  const double n = raters;
  const Eigen::VectorXd per_item = ((c.array().square().rowwise().sum()) - n) / (n * (n - 1.0));
  const double po = per_item.mean();
  const Eigen::RowVectorXd category_share = c.colwise().sum() / (static_cast<double>(items) * n);
  const double pe = category_share.squaredNorm();
  if (pe >= 1.0) fail(ErrorCode::undefined, "fleiss_kappa: a single category is used throughout");
  return finish_kappa(po, pe, static_cast<std::size_t>(items), "fleiss_kappa");
}

std::string_view to_string(UTestMethod m) noexcept {
  return m == UTestMethod::exact ? "exact" : "normal_approx_tie_corrected";
}

double exact_u_pvalue(std::span<const std::int64_t> ranks2, std::size_t n1, std::int64_t u2) {
  const std::size_t total_n = ranks2.size();
  if (n1 > total_n - n1) {
    // Work with the smaller sample; U_y = n1 * n2 - U_x and the two-sided p is unchanged.
    std::vector<std::int64_t> swapped(ranks2.begin() + static_cast<std::ptrdiff_t>(n1), ranks2.end());
    swapped.insert(swapped.end(), ranks2.begin(), ranks2.begin() + static_cast<std::ptrdiff_t>(n1));
    const auto n2 = static_cast<std::int64_t>(total_n - n1);
    return exact_u_pvalue(swapped, total_n - n1, 2 * static_cast<std::int64_t>(n1) * n2 - u2);
  }
  const auto m = static_cast<std::int64_t>(n1);
  // Distribution of the doubled rank sum of n1 items drawn from the pool.
  std::int64_t max_sum = 0;
  for (auto r : ranks2) max_sum += r;
  std::vector<std::vector<long double>> ways(n1 + 1, std::vector<long double>(max_sum + 1, 0.0L));
  ways[0][0] = 1.0L;
  std::int64_t reach = 0;
  for (std::size_t item = 0; item < total_n; ++item) {
    const std::int64_t r = ranks2[item];
    reach += r;
    const std::size_t top = std::min(n1, item + 1);
    for (std::size_t j = top; j >= 1; --j) {
      auto& dst = ways[j];
      const auto& src = ways[j - 1];
      for (std::int64_t s = reach; s >= r; --s) dst[s] += src[s - r];
    }
  }
  const std::int64_t offset = m * (m + 1);
  long double below = 0.0L, above = 0.0L, total = 0.0L;
  for (std::int64_t s = 0; s <= max_sum; ++s) {
    const long double w = ways[n1][s];
    if (w == 0.0L) continue;
    total += w;
    const std::int64_t u = s - offset;
    if (u <= u2) below += w;
    if (u >= u2) above += w;
  }
  const double tail = static_cast<double>(std::min(below, above));
  return std::min(1.0, 2.0 * tail / static_cast<double>(total));
}

double normal_u_pvalue(std::span<const std::int64_t> ranks2, std::size_t n1, double u) {
  const double N = static_cast<double>(ranks2.size());
  const double a = static_cast<double>(n1);
  const double b = N - a;
  std::vector<std::int64_t> sorted(ranks2.begin(), ranks2.end());
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double mean = a * b / 2.0;
  const double var = a * b / 12.0 * ((N + 1.0) - tie_term / (N * (N - 1.0)));
  if (!(var > 0.0)) return 1.0;
  const double z = std::max(0.0, std::abs(u - mean) - 0.5) / std::sqrt(var);
  const double p = std::erfc(z / std::sqrt(2.0));
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

UTestResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                           const UTestOptions& options) {
  if (x.empty() || y.empty()) fail(ErrorCode::domain, "mann_whitney_u: both samples must be non-empty");
  std::vector<double> pooled;
  pooled.reserve(x.size() + y.size());
  pooled.insert(pooled.end(), x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto ranks2 = doubled_midranks<double>(pooled);
  std::int64_t rank_sum2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) rank_sum2 += ranks2[i];
  const auto n1 = static_cast<std::int64_t>(x.size());
  const std::int64_t u2 = rank_sum2 - n1 * (n1 + 1);

  UTestResult r;
  r.n1 = x.size();
  r.n2 = y.size();
  r.u_statistic = static_cast<double>(u2) / 2.0;
  if (x.size() * y.size() <= options.exact_cap) {
    r.method = UTestMethod::exact;
    r.p_two_sided = exact_u_pvalue(ranks2, x.size(), u2);
  } else {
    r.method = UTestMethod::normal_approx_tie_corrected;
    r.p_two_sided = normal_u_pvalue(ranks2, x.size(), r.u_statistic);
  }
  return r;
}

Ecdf::Ecdf(std::span<const double> values) : n_(values.size()) {
  if (values.empty()) fail(ErrorCode::domain, "ecdf: no values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    support_.push_back(sorted[i]);
    counts_.push_back(i + 1);
    cumulative_.push_back(static_cast<double>(i + 1) / static_cast<double>(n_));
  }
}

double Ecdf::operator()(double t) const {
  const auto it = std::upper_bound(support_.begin(), support_.end(), t);
  if (it == support_.begin()) return 0.0;
  return cumulative_[static_cast<std::size_t>(it - support_.begin()) - 1];
}

}  // namespace ctn
