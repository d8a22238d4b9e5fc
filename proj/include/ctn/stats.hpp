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

// Agreement and rank statistics: Cohen's and Fleiss' kappa, rank AUC,
// Mann-Whitney U and the empirical CDF. Everything here is pure.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ctn/error.hpp"
#include "ctn/types.hpp"

namespace ctn {

struct KappaResult {
  double kappa = 0.0;
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
  std::size_t n_items = 0;
};

// Chance-corrected agreement of two raters over the same items.
// Throws dimension on length mismatch or empty input, undefined when pe == 1
// with po < 1. po == pe == 1 yields kappa 1.
KappaResult cohen_kappa(std::span<const Verdict> a, std::span<const Verdict> b);

// Fleiss' kappa over an items x categories matrix of rating counts. Every row
// must sum to `raters`. A single category used throughout (pe == 1) is undefined.
KappaResult fleiss_kappa(const Eigen::Ref<const Eigen::MatrixXi>& counts, int raters);

// Doubled midranks (1-based) of `values`; doubling keeps tie ranks integral.
template <typename Scalar>
std::vector<std::int64_t> doubled_midranks(std::span<const Scalar> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return values[l] < values[r]; });
  std::vector<std::int64_t> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && !(values[order[i]] < values[order[j]])) ++j;
    // positions i..j-1 share ranks (i+1)..j; doubled midrank = i + 1 + j
    const auto r2 = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r2;
    i = j;
  }
  return ranks;
}

// 2 * U for the first sample: twice the number of (x, y) pairs with x > y plus
// the number of ties. Kept integral so AUC and U agree bit for bit.
template <typename Scalar>
std::int64_t doubled_u_statistic(std::span<const Scalar> x, std::span<const Scalar> y) {
  std::vector<Scalar> pooled;
  pooled.reserve(x.size() + y.size());
  pooled.insert(pooled.end(), x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto ranks = doubled_midranks<Scalar>(pooled);
  std::int64_t rank_sum2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) rank_sum2 += ranks[i];
  const auto n1 = static_cast<std::int64_t>(x.size());
  return rank_sum2 - n1 * (n1 + 1);
}

// P(score_pos > score_neg) with ties counted one half. Throws domain if either
// side is empty. For 0/1 scores this is balanced accuracy.
template <typename Scalar>
double rank_auc(std::span<const Scalar> pos, std::span<const Scalar> neg) {
  if (pos.empty() || neg.empty()) fail(ErrorCode::domain, "rank_auc: both classes must be non-empty");
  const auto u2 = doubled_u_statistic<Scalar>(pos, neg);
  return static_cast<double>(u2) /
         (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline double rank_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  return rank_auc<double>(std::span<const double>(pos), std::span<const double>(neg));
}

enum class UTestMethod { exact, normal_approx_tie_corrected };

std::string_view to_string(UTestMethod m) noexcept;

struct UTestResult {
  double u_statistic = 0.0;  // U for the first sample: #{x > y} + 0.5 #{x == y}
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  double p_two_sided = 1.0;
  UTestMethod method = UTestMethod::exact;
};

struct UTestOptions {
  // Exact permutation distribution is used while n1 * n2 <= exact_cap.
  std::size_t exact_cap = 400;
};

// Two-sided Mann-Whitney U test with midranks. Exact mode enumerates the
// permutation distribution of the observed (possibly tied) ranks and reports
// min(1, 2 * min(P[U <= u], P[U >= u])). Otherwise a normal approximation with
// tie-corrected variance and a 0.5 continuity correction.
UTestResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                           const UTestOptions& options = {});

// Exact two-sided p for a doubled U under the permutation distribution of the
// given pooled doubled ranks, first n1 of which belong to x. Exposed for tests.
double exact_u_pvalue(std::span<const std::int64_t> pooled_ranks2, std::size_t n1, std::int64_t u2);

double normal_u_pvalue(std::span<const std::int64_t> pooled_ranks2, std::size_t n1, double u);

// Right-continuous empirical CDF.
class Ecdf {
 public:
  explicit Ecdf(std::span<const double> values);

  // Fraction of observations <= t.
  double operator()(double t) const;

  const std::vector<double>& support() const noexcept { return support_; }
  const std::vector<double>& cumulative() const noexcept { return cumulative_; }
  std::size_t size() const noexcept { return n_; }

 private:
  std::vector<double> support_;
  std::vector<double> cumulative_;
  std::vector<std::size_t> counts_;  // #values <= support_[i]
  std::size_t n_ = 0;
};

inline Ecdf ecdf(std::span<const double> values) { return Ecdf(values); }

}  // namespace ctn
