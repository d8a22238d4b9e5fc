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

// Confusion counts, precision/recall/F1/AUC, and stratified cross-validation
// of the classical models.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ctn/classifiers.hpp"
#include "ctn/store.hpp"
#include "ctn/types.hpp"

namespace ctn {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

// Positive iff score > threshold (strict).
Confusion compute_confusion(std::span<const double> scores, std::span<const Label> labels, double threshold = 0.5);
Confusion compute_confusion(std::span<const Label> predicted, std::span<const Label> labels);

struct BinaryMetrics {
  Confusion confusion;
  double precision = 0.0;  // 0 when undefined (no predicted positives), flagged
  double recall = 0.0;     // 0 when undefined (no actual positives), flagged
  double f1 = 0.0;
  std::optional<double> auc;  // absent when a class is missing
  bool precision_undefined = false;
  bool recall_undefined = false;
};

BinaryMetrics metrics_from_confusion(const Confusion& c);

// Confusion at `threshold`; AUC from the raw scores.
BinaryMetrics binary_metrics(std::span<const double> scores, std::span<const Label> labels, double threshold = 0.5);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t n = 0;
};

MetricSummary summarize(std::span<const double> values);

struct FoldResult {
  int fold = 0;
  std::size_t n = 0;
  BinaryMetrics metrics;
};

struct MetricsReport {
  std::string model_id;
  std::string split_id;
  std::int64_t timestamp = 0;
  std::vector<FoldResult> folds;
  MetricSummary precision, recall, f1, auc;
  BinaryMetrics pooled;  // from the summed confusion table

  std::string to_json() const;       // pretty JSON, stable key order
  std::string to_markdown() const;   // Model | Precision | Recall | F1 | AUC
  static MetricsReport from_json(const std::string& text);
};

MetricsReport aggregate_folds(std::string model_id, std::string split_id, std::vector<FoldResult> folds);

struct ModelSpec {
  ModelKind kind = ModelKind::LR;
  LrParams lr;
  SvmParams svm;
  KnnParams knn;

  std::string model_id() const;
};

// Applies `key=value` overrides (l2, lr, epochs, seed, c, k) to the spec.
void apply_hyperparameter(ModelSpec& spec, const std::string& key, const std::string& value);

TrainedModel train_model(const ModelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const Label> y,
                         std::vector<std::string> ids, std::string fingerprint = {});

// Cross-validation over explicit data: for every fold f, train on the other
// folds and score fold f.
MetricsReport evaluate_cv(const ModelSpec& spec, std::span<const std::string> ids,
                          const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const Label> y,
                          std::span<const int> folds, const std::string& split_id = {});

// Cross-validation over the labeled, embedded documents of a stored split.
MetricsReport evaluate_cv(const ModelSpec& spec, const DatasetStore& store, const std::string& split_id);

// Reproducible report timestamp: $SOURCE_DATE_EPOCH when set, else now.
std::int64_t report_timestamp();

}  // namespace ctn
