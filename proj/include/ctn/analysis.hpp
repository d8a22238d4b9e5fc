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

// Corpus-level products of a trained classifier: per-forum prevalence with
// precision/recall bounds, and the CT vs non-CT engagement comparison.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctn/stats.hpp"
#include "ctn/store.hpp"
#include "ctn/types.hpp"

namespace ctn {

struct PrevalenceBounds {
  double upper = 0.0;
  double lower = 0.0;
};

// Upper bound treats every detected positive as a true positive and scales by
// recall (capped at 1); lower bound keeps only the expected true positives.
//   upper = min(1, ratio / recall),  lower = ratio * precision
PrevalenceBounds prevalence_bounds(double pos_ratio, double precision, double recall);

struct PrevalenceRow {
  std::string subreddit;
  std::size_t n_posts = 0;
  std::size_t positives = 0;
  double pos_ratio = 0.0;
  double upper_bound = 0.0;
  double lower_bound = 0.0;
};

struct PrevalenceTable {
  std::vector<PrevalenceRow> rows;  // ordered by subreddit name
  PrevalenceRow overall;
  double precision = 0.0;
  double recall = 0.0;

  std::string to_json() const;
  std::string to_markdown() const;  // Subreddit | Posts | Pos. Ratio | Upper Bound | Lower Bound
};

// Hard label of a prediction: its label when present, else score > 0.5.
std::optional<Label> predicted_label(const PredictionRecord& r);

PrevalenceTable prevalence(std::span<const PredictionRecord> predictions, double precision, double recall);

struct EngagementSample {
  Label group = Label::NonCT;
  double comments = 0.0;
  double karma = 0.0;
};

struct MeasureComparison {
  std::string measure;  // comments | karma
  Ecdf ct;
  Ecdf non_ct;
  UTestResult test;     // x = CT, y = non-CT
  std::string verdict;  // direction of stochastic dominance
};

struct EngagementReport {
  std::size_t n_ct = 0;
  std::size_t n_non_ct = 0;
  std::vector<MeasureComparison> measures;

  std::string to_json() const;
  // Columns group,measure,x,F.
  std::string ecdf_csv() const;
};

EngagementReport engagement_compare(std::span<const EngagementSample> samples, const UTestOptions& options = {});

std::vector<EngagementSample> engagement_samples(std::span<const PredictionRecord> predictions);

}  // namespace ctn
