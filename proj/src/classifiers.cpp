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

#include "ctn/classifiers.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ctn/embedding.hpp"

namespace ctn {

using nlohmann::json;

namespace {

void check_training_set(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const Label> y, const char* who) {
  if (static_cast<std::size_t>(X.rows()) != y.size())
    fail(ErrorCode::dimension, std::string(who) + ": " + std::to_string(X.rows()) + " rows but " +
                                   std::to_string(y.size()) + " labels");
  if (y.size() < 2) fail(ErrorCode::degenerate, std::string(who) + ": need at least two samples");
  const auto pos = std::count(y.begin(), y.end(), Label::CT);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(y.size()))
    fail(ErrorCode::degenerate, std::string(who) + ": training labels contain a single class");
  if (!X.allFinite()) fail(ErrorCode::domain, std::string(who) + ": non-finite feature values");
}

void check_apply(const TrainedModel& model, Eigen::Index cols, std::string_view fingerprint) {
  if (!fingerprint.empty() && !model.fingerprint.empty() && fingerprint != model.fingerprint)
    fail(ErrorCode::integrity, "model trained on embeddings " + model.fingerprint + ", applied to " +
                                   std::string(fingerprint));
  if (cols != model.dim())
    fail(ErrorCode::dimension, "model expects dim " + std::to_string(model.dim()) + ", got " + std::to_string(cols));
}

}  // namespace

std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::LR: return "lr";
    case ModelKind::KNN: return "knn";
    case ModelKind::LinearSVM: return "svm";
  }
  return "lr";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "lr") return ModelKind::LR;
  if (s == "knn") return ModelKind::KNN;
  if (s == "svm") return ModelKind::LinearSVM;
  fail(ErrorCode::parameter, "unknown model kind '" + std::string(s) + "' (expected lr, svm or knn)");
}

Eigen::VectorXd label_targets(std::span<const Label> y) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) t(static_cast<Eigen::Index>(i)) = y[i] == Label::CT ? 1.0 : 0.0;
  return t;
}

Eigen::VectorXd label_signs(std::span<const Label> y) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) t(static_cast<Eigen::Index>(i)) = y[i] == Label::CT ? 1.0 : -1.0;
  return t;
}

TrainedModel train_lr(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const Label> y, const LrParams& params,
                      std::string fingerprint) {
  check_training_set(X, y, "train_lr");
  if (params.l2 < 0 || !(params.lr > 0) || params.epochs < 0)
    fail(ErrorCode::parameter, "train_lr: need l2 >= 0, lr > 0, epochs >= 0");
  const Eigen::VectorXd targets = label_targets(y);

  TrainedModel m;
  m.kind = ModelKind::LR;
  m.fingerprint = std::move(fingerprint);
  m.hyperparameters = {{"l2", params.l2}, {"lr", params.lr}, {"epochs", params.epochs}};
  m.seed = params.seed;
  m.weights = Eigen::VectorXd::Zero(X.cols());
  m.bias = 0.0;
  m.loss_trace.reserve(static_cast<std::size_t>(params.epochs) + 1);
  for (int epoch = 0; epoch <= params.epochs; ++epoch) {
    const auto obj = logistic_objective(X, targets, m.weights, m.bias, params.l2);
    if (!std::isfinite(obj.loss)) fail(ErrorCode::divergence, "train_lr: loss diverged at iteration " + std::to_string(epoch));
    m.loss_trace.push_back(obj.loss);
    if (epoch == params.epochs) break;
    m.weights -= params.lr * obj.grad_w;
    m.bias -= params.lr * obj.grad_b;
  }
  m.iterations = params.epochs;
  return m;
}

TrainedModel train_svm(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const Label> y, const SvmParams& params,
                       std::string fingerprint) {
  check_training_set(X, y, "train_svm");
  if (!(params.c > 0) || !(params.lr > 0) || params.epochs < 0)
    fail(ErrorCode::parameter, "train_svm: need c > 0, lr > 0, epochs >= 0");
  const Eigen::VectorXd signs = label_signs(y);
  const double lambda = svm_lambda(params.c, X.rows());

  TrainedModel m;
  m.kind = ModelKind::LinearSVM;
  m.fingerprint = std::move(fingerprint);
  m.hyperparameters = {{"c", params.c}, {"lr", params.lr}, {"epochs", params.epochs}};
  m.seed = params.seed;

  // Subgradient steps lr / sqrt(t + 1); the best iterate seen is returned.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(X.cols());
  double b = 0.0;
  double best = std::numeric_limits<double>::infinity();
  m.weights = w;
  m.bias = b;
  for (int epoch = 0; epoch <= params.epochs; ++epoch) {
    const auto obj = hinge_objective(X, signs, w, b, lambda);
    if (!std::isfinite(obj.loss)) fail(ErrorCode::divergence, "train_svm: loss diverged at iteration " + std::to_string(epoch));
    m.loss_trace.push_back(obj.loss);
    if (obj.loss < best) {
      best = obj.loss;
      m.weights = w;
      m.bias = b;
    }
    if (epoch == params.epochs) break;
    const double step = params.lr / std::sqrt(static_cast<double>(epoch) + 1.0);
    w -= step * obj.grad_w;
    b -= step * obj.grad_b;
  }
  m.iterations = params.epochs;
  return m;
}

TrainedModel train_knn(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const Label> y,
                       std::vector<std::string> ids, const KnnParams& params, std::string fingerprint) {
  if (static_cast<std::size_t>(X.rows()) != y.size() || ids.size() != y.size())
    fail(ErrorCode::dimension, "train_knn: rows, labels and ids disagree in count");
  if (params.k <= 0 || params.k % 2 == 0) fail(ErrorCode::parameter, "knn: k must be a positive odd integer");
  if (static_cast<std::size_t>(params.k) > y.size())
    fail(ErrorCode::size, "knn: k = " + std::to_string(params.k) + " exceeds " + std::to_string(y.size()) +
                              " training points");
  TrainedModel m;
  m.kind = ModelKind::KNN;
  m.fingerprint = std::move(fingerprint);
  m.hyperparameters = {{"k", params.k}};
  m.k = params.k;
  m.train_vectors = X;
  m.train_ids = std::move(ids);
  m.train_labels.assign(y.begin(), y.end());
  return m;
}

KnnVote knn_predict(const TrainedModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& query) {
  if (model.kind != ModelKind::KNN) fail(ErrorCode::parameter, "knn_predict on a non-KNN model");
  if (model.k <= 0 || model.k % 2 == 0) fail(ErrorCode::parameter, "knn: k must be a positive odd integer");
  const auto n = model.train_labels.size();
  if (static_cast<std::size_t>(model.k) > n) fail(ErrorCode::size, "knn: k exceeds training set size");
  if (query.size() != model.train_vectors.cols()) fail(ErrorCode::dimension, "knn: query dimension mismatch");

  const Eigen::VectorXd sims = cosine_similarities(query, model.train_vectors);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto kk = static_cast<std::ptrdiff_t>(model.k);
  std::partial_sort(order.begin(), order.begin() + kk, order.end(), [&](std::size_t a, std::size_t b) {
    const double da = 1.0 - sims(static_cast<Eigen::Index>(a));
    const double db = 1.0 - sims(static_cast<Eigen::Index>(b));
    if (da != db) return da < db;
    return model.train_ids[a] < model.train_ids[b];
  });
  int positives = 0;
  for (std::ptrdiff_t i = 0; i < kk; ++i) positives += model.train_labels[order[static_cast<std::size_t>(i)]] == Label::CT;
  KnnVote vote;
  vote.score = static_cast<double>(positives) / static_cast<double>(model.k);
  vote.label = 2 * positives > model.k ? Label::CT : Label::NonCT;
  return vote;
}

Eigen::VectorXd predict_proba(const TrainedModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X,
                              std::string_view fingerprint) {
  check_apply(model, X.cols(), fingerprint);
  Eigen::VectorXd out(X.rows());
  if (model.kind == ModelKind::KNN) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = knn_predict(model, X.row(i)).score;
    return out;
  }
  const Eigen::VectorXd margin = (X * model.weights).array() + model.bias;
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = sigmoid(margin(i));
  return out;
}

std::vector<Label> predict_labels(const TrainedModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X,
                                  std::string_view fingerprint, double threshold) {
  const Eigen::VectorXd p = predict_proba(model, X, fingerprint);
  std::vector<Label> out(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(i)] = p(i) > threshold ? Label::CT : Label::NonCT;
  return out;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  json manifest{{"format", "ctnarr-model"},
                {"version", 1},
                {"kind", to_string(model.kind)},
                {"fingerprint", model.fingerprint},
                {"hyperparameters", model.hyperparameters},
                {"seed", model.seed},
                {"iterations", model.iterations},
                {"blob", path.filename().string() + ".bin"}};
  std::vector<double> blob;
  if (model.kind == ModelKind::KNN) {
    manifest["k"] = model.k;
    manifest["rows"] = model.train_vectors.rows();
    manifest["cols"] = model.train_vectors.cols();
    manifest["train_ids"] = model.train_ids;
    std::vector<std::string> labels;
    for (auto l : model.train_labels) labels.emplace_back(to_string(l));
    manifest["train_labels"] = labels;
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = model.train_vectors;
    blob.assign(rm.data(), rm.data() + rm.size());
  } else {
    manifest["dim"] = model.weights.size();
    manifest["final_loss"] = model.loss_trace.empty() ? 0.0 : model.loss_trace.back();
    blob.assign(model.weights.data(), model.weights.data() + model.weights.size());
    blob.push_back(model.bias);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write model " + path.string());
  out << manifest.dump() << "\n";
  std::ofstream bin(path.string() + ".bin", std::ios::binary | std::ios::trunc);
  bin.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(double)));
  if (!out || !bin) fail(ErrorCode::io, "write failed for model " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::not_found, "no model file " + path.string());
  std::string line;
  std::getline(in, line);
  json manifest = json::parse(line, nullptr, false);
  if (manifest.is_discarded() || manifest.value("format", "") != "ctnarr-model")
    fail(ErrorCode::integrity, "not a model manifest: " + path.string());
  if (manifest.value("version", 0) != 1) fail(ErrorCode::integrity, "unsupported model version");
  TrainedModel m;
  m.kind = parse_model_kind(manifest.at("kind").get<std::string>());
  m.fingerprint = manifest.value("fingerprint", "");
  m.hyperparameters = manifest.at("hyperparameters").get<std::map<std::string, double>>();
  m.seed = manifest.value("seed", std::uint64_t{0});
  m.iterations = manifest.value("iterations", 0);

  std::ifstream raw(path.string() + ".bin", std::ios::binary | std::ios::ate);
  if (!raw) fail(ErrorCode::integrity, "missing model blob for " + path.string());
  const auto bytes = static_cast<std::size_t>(raw.tellg());
  raw.seekg(0);
  std::vector<double> blob(bytes / sizeof(double), 0.0);
  raw.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(double)));

  if (m.kind == ModelKind::KNN) {
    m.k = manifest.at("k").get<int>();
    const auto rows = manifest.at("rows").get<Eigen::Index>();
    const auto cols = manifest.at("cols").get<Eigen::Index>();
    if (blob.size() != static_cast<std::size_t>(rows * cols)) fail(ErrorCode::integrity, "model blob size mismatch");
    m.train_vectors = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        blob.data(), rows, cols);
    m.train_ids = manifest.at("train_ids").get<std::vector<std::string>>();
    for (const auto& s : manifest.at("train_labels").get<std::vector<std::string>>()) {
      const auto l = parse_label(s);
      if (!l) fail(ErrorCode::integrity, "bad label in model manifest");
      m.train_labels.push_back(*l);
    }
  } else {
    const auto dim = manifest.at("dim").get<Eigen::Index>();
    if (blob.size() != static_cast<std::size_t>(dim + 1)) fail(ErrorCode::integrity, "model blob size mismatch");
    m.weights = Eigen::Map<const Eigen::VectorXd>(blob.data(), dim);
    m.bias = blob.back();
  }
  if (!m.weights.allFinite() || !std::isfinite(m.bias) || !m.train_vectors.allFinite())
    fail(ErrorCode::integrity, "model parameters are not finite");
  return m;
}

}  // namespace ctn
