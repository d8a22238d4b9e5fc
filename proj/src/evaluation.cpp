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

#include "ctn/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "ctn/error.hpp"
#include "ctn/stats.hpp"

namespace ctn {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Confusion compute_confusion(std::span<const double> scores, std::span<const Label> labels, double threshold) {
  if (scores.size() != labels.size())
    fail(ErrorCode::dimension, "compute_confusion: " + std::to_string(scores.size()) + " scores vs " +
                                   std::to_string(labels.size()) + " labels");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > threshold;
    const bool actual = labels[i] == Label::CT;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Confusion compute_confusion(std::span<const Label> predicted, std::span<const Label> labels) {
  std::vector<double> scores(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) scores[i] = predicted[i] == Label::CT ? 1.0 : 0.0;
  return compute_confusion(scores, labels, 0.5);
}

BinaryMetrics metrics_from_confusion(const Confusion& c) {
  BinaryMetrics m;
  m.confusion = c;
  if (c.tp + c.fp == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

BinaryMetrics binary_metrics(std::span<const double> scores, std::span<const Label> labels, double threshold) {
  BinaryMetrics m = metrics_from_confusion(compute_confusion(scores, labels, threshold));
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == Label::CT ? pos : neg).push_back(scores[i]);
  if (!pos.empty() && !neg.empty()) m.auc = rank_auc(pos, neg);
  return m;
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  s.n = values.size();
  if (values.empty()) return s;
  // shifted by the first value so identical inputs give exactly zero spread
  const double shift = values.front();
  double sum = 0;
  for (double v : values) sum += v - shift;
  const double offset = sum / static_cast<double>(values.size());
  s.mean = shift + offset;
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - shift - offset) * (v - shift - offset);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

MetricsReport aggregate_folds(std::string model_id, std::string split_id, std::vector<FoldResult> folds) {
  MetricsReport r;
  r.model_id = std::move(model_id);
  r.split_id = std::move(split_id);
  r.timestamp = report_timestamp();
  std::vector<double> p, rc, f, a;
  Confusion pooled;
  for (const auto& fold : folds) {
    p.push_back(fold.metrics.precision);
    rc.push_back(fold.metrics.recall);
    f.push_back(fold.metrics.f1);
    if (fold.metrics.auc) a.push_back(*fold.metrics.auc);
    pooled.tp += fold.metrics.confusion.tp;
    pooled.fp += fold.metrics.confusion.fp;
    pooled.tn += fold.metrics.confusion.tn;
    pooled.fn += fold.metrics.confusion.fn;
  }
  r.precision = summarize(p);
  r.recall = summarize(rc);
  r.f1 = summarize(f);
  r.auc = summarize(a);
  r.pooled = metrics_from_confusion(pooled);
  r.folds = std::move(folds);
  return r;
}

namespace {

ordered_json summary_json(const MetricSummary& s) { return ordered_json{{"mean", s.mean}, {"std", s.std}, {"n", s.n}}; }

MetricSummary summary_from(const json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("n").get<std::size_t>()}; }

ordered_json metrics_json(const BinaryMetrics& m) {
  ordered_json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["auc"] = m.auc ? ordered_json(*m.auc) : ordered_json(nullptr);
  j["confusion"] = {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"tn", m.confusion.tn}, {"fn", m.confusion.fn}};
  ordered_json flags = ordered_json::array();
  if (m.precision_undefined) flags.push_back("precision_undefined");
  if (m.recall_undefined) flags.push_back("recall_undefined");
  if (!m.auc) flags.push_back("auc_undefined");
  j["flags"] = flags;
  return j;
}

BinaryMetrics metrics_from(const json& j) {
  BinaryMetrics m;
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  if (j.at("auc").is_number()) m.auc = j["auc"].get<double>();
  const auto& c = j.at("confusion");
  m.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("tn").get<std::size_t>(),
                 c.at("fn").get<std::size_t>()};
  for (const auto& f : j.value("flags", json::array())) {
    if (f == "precision_undefined") m.precision_undefined = true;
    if (f == "recall_undefined") m.recall_undefined = true;
  }
  return m;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

std::string MetricsReport::to_json() const {
  ordered_json j;
  j["model_id"] = model_id;
  j["split_id"] = split_id;
  j["timestamp"] = timestamp;
  j["aggregation"] = "fold_mean";
  j["precision"] = summary_json(precision);
  j["recall"] = summary_json(recall);
  j["f1"] = summary_json(f1);
  j["auc"] = summary_json(auc);
  j["pooled"] = metrics_json(pooled);
  ordered_json fs = ordered_json::array();
  for (const auto& f : folds) {
    ordered_json fj;
    fj["fold"] = f.fold;
    fj["n"] = f.n;
    fj.update(metrics_json(f.metrics));
    fs.push_back(fj);
  }
  j["folds"] = fs;
  return j.dump(2) + "\n";
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::parse, "metrics report is not valid JSON");
  MetricsReport r;
  try {
    r.model_id = j.at("model_id").get<std::string>();
    r.split_id = j.value("split_id", "");
    r.timestamp = j.value("timestamp", std::int64_t{0});
    r.precision = summary_from(j.at("precision"));
    r.recall = summary_from(j.at("recall"));
    r.f1 = summary_from(j.at("f1"));
    r.auc = summary_from(j.at("auc"));
    if (j.contains("pooled")) r.pooled = metrics_from(j["pooled"]);
    for (const auto& f : j.value("folds", json::array()))
      r.folds.push_back({f.at("fold").get<int>(), f.at("n").get<std::size_t>(), metrics_from(f)});
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("metrics report: ") + e.what());
  }
  return r;
}

std::string MetricsReport::to_markdown() const {
  std::string out = "| Model | Precision | Recall | F1 | AUC |\n|---|---:|---:|---:|---:|\n";
  out += "| " + model_id + " | " + fmt("%.1f%%", 100.0 * precision.mean) + " | " + fmt("%.1f%%", 100.0 * recall.mean) +
         " | " + fmt("%.3f", f1.mean) + " | " + (auc.n ? fmt("%.3f", auc.mean) : std::string("n/a")) + " |\n";
  return out;
}

std::string ModelSpec::model_id() const {
  switch (kind) {
    case ModelKind::LR: return "lr";
    case ModelKind::LinearSVM: return "svm";
    case ModelKind::KNN: return "knn-k" + std::to_string(knn.k);
  }
  return "lr";
}

void apply_hyperparameter(ModelSpec& spec, const std::string& key, const std::string& value) {
  double v = 0;
  try {
    std::size_t used = 0;
    v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
  } catch (const std::exception&) {
    fail(ErrorCode::parameter, "hyperparameter " + key + " needs a number, got '" + value + "'");
  }
  if (key == "l2") spec.lr.l2 = v;
  else if (key == "lr") spec.lr.lr = spec.svm.lr = v;
  else if (key == "epochs") spec.lr.epochs = spec.svm.epochs = static_cast<int>(v);
  else if (key == "seed") spec.lr.seed = spec.svm.seed = static_cast<std::uint64_t>(v);
  else if (key == "c") spec.svm.c = v;
  else if (key == "k") spec.knn.k = static_cast<int>(v);
  else fail(ErrorCode::parameter, "unknown hyperparameter '" + key + "'");
}

TrainedModel train_model(const ModelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const Label> y,
                         std::vector<std::string> ids, std::string fingerprint) {
  switch (spec.kind) {
    case ModelKind::LR: return train_lr(X, y, spec.lr, std::move(fingerprint));
    case ModelKind::LinearSVM: return train_svm(X, y, spec.svm, std::move(fingerprint));
    case ModelKind::KNN: return train_knn(X, y, std::move(ids), spec.knn, std::move(fingerprint));
  }
  fail(ErrorCode::parameter, "unknown model kind");
}

MetricsReport evaluate_cv(const ModelSpec& spec, std::span<const std::string> ids,
                          const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const Label> y,
                          std::span<const int> folds, const std::string& split_id) {
  if (ids.size() != y.size() || folds.size() != y.size() || static_cast<std::size_t>(X.rows()) != y.size())
    fail(ErrorCode::dimension, "evaluate_cv: ids, rows, labels and folds disagree in count");
  const std::set<int> fold_ids(folds.begin(), folds.end());
  std::vector<FoldResult> results;
  for (int f : fold_ids) {
    std::vector<Eigen::Index> train_rows, test_rows;
    for (std::size_t i = 0; i < folds.size(); ++i)
      (folds[i] == f ? test_rows : train_rows).push_back(static_cast<Eigen::Index>(i));
    const Eigen::MatrixXd Xtr = X(train_rows, Eigen::all);
    const Eigen::MatrixXd Xte = X(test_rows, Eigen::all);
    std::vector<Label> ytr, yte;
    std::vector<std::string> idtr;
    for (auto r : train_rows) {
      ytr.push_back(y[static_cast<std::size_t>(r)]);
      idtr.push_back(ids[static_cast<std::size_t>(r)]);
    }
    for (auto r : test_rows) yte.push_back(y[static_cast<std::size_t>(r)]);
    const auto model = train_model(spec, Xtr, ytr, std::move(idtr));
    const Eigen::VectorXd scores = predict_proba(model, Xte);
    results.push_back({f, test_rows.size(),
                       binary_metrics(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), yte)});
  }
  return aggregate_folds(spec.model_id(), split_id, std::move(results));
}

MetricsReport evaluate_cv(const ModelSpec& spec, const DatasetStore& store, const std::string& split_id) {
  const Split split = store.get_split(split_id);
  std::vector<std::string> ids;
  std::vector<Label> y;
  std::vector<int> folds;
  for (const auto& a : split.assignments) {
    const auto label = store.label(a.post_id);
    if (!label) fail(ErrorCode::integrity, "split " + split_id + " references unlabeled post " + a.post_id);
    ids.push_back(a.post_id);
    y.push_back(label->label);
    folds.push_back(a.fold);
  }
  const Eigen::MatrixXd X = store.embedding_matrix(ids);
  return evaluate_cv(spec, ids, X, y, folds, split_id);
}

std::int64_t report_timestamp() {
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      return std::stoll(env);
    } catch (const std::exception&) {
    }
  }
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

}  // namespace ctn
