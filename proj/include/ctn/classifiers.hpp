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

// Classical classifiers over embedding matrices (one row per document):
// L2-regularized logistic regression and linear SVM trained by deterministic
// full-batch (sub)gradient descent, and cosine k-nearest neighbours.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ctn/error.hpp"
#include "ctn/types.hpp"

namespace ctn {

enum class ModelKind { LR, KNN, LinearSVM };

std::string_view to_string(ModelKind k) noexcept;
ModelKind parse_model_kind(std::string_view s);

struct LrParams {
  double l2 = 1e-3;
  double lr = 0.1;
  int epochs = 2000;
  std::uint64_t seed = 0;
};

struct SvmParams {
  double c = 1.0;
  double lr = 0.1;
  int epochs = 2000;
  std::uint64_t seed = 0;
};

struct KnnParams {
  int k = 5;
};

struct TrainedModel {
  ModelKind kind = ModelKind::LR;
  std::string fingerprint;
  std::map<std::string, double> hyperparameters;

  // LR / LinearSVM
  Eigen::VectorXd weights;
  double bias = 0.0;
  std::uint64_t seed = 0;
  int iterations = 0;
  std::vector<double> loss_trace;

  // KNN
  int k = 0;
  Eigen::MatrixXd train_vectors;
  std::vector<std::string> train_ids;
  std::vector<Label> train_labels;

  Eigen::Index dim() const noexcept {
    return kind == ModelKind::KNN ? train_vectors.cols() : weights.size();
  }
};

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

// log(1 + exp(t)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar t) {
  return std::max(t, Scalar(0)) + std::log1p(std::exp(-std::abs(t)));
}

template <typename Scalar>
struct Objective {
  Scalar loss;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad_w;
  Scalar grad_b;
};

// Mean logistic loss + l2/2 |w|^2 (bias unregularized) and its gradient.
// `targets` holds 0/1.
template <typename DX, typename DY, typename DW>
Objective<typename DX::Scalar> logistic_objective(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& targets,
                                                  const Eigen::MatrixBase<DW>& w, typename DX::Scalar b,
                                                  typename DX::Scalar l2) {
  using Scalar = typename DX::Scalar;
  const Eigen::Index n = X.rows();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z = (X * w).array() + b;
  Scalar loss = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> residual(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += targets(i) > Scalar(0.5) ? softplus(-z(i)) : softplus(z(i));
    residual(i) = sigmoid(z(i)) - targets(i);
  }
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  Objective<Scalar> out;
  out.loss = loss * inv_n + l2 * w.squaredNorm() / Scalar(2);
  out.grad_w = X.transpose() * residual * inv_n + l2 * w;
  out.grad_b = residual.sum() * inv_n;
  return out;
}

// lambda/2 |w|^2 + mean(max(0, 1 - y (w.x + b))) with y in {-1, +1}. The
// gradient is the subgradient taking 0 at the kink.
template <typename DX, typename DY, typename DW>
Objective<typename DX::Scalar> hinge_objective(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& signs,
                                               const Eigen::MatrixBase<DW>& w, typename DX::Scalar b,
                                               typename DX::Scalar lambda) {
  using Scalar = typename DX::Scalar;
  const Eigen::Index n = X.rows();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> margin = signs.array() * ((X * w).array() + b);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coeff = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (margin(i) < Scalar(1)) {
      loss += Scalar(1) - margin(i);
      coeff(i) = -signs(i);
    }
  }
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  Objective<Scalar> out;
  out.loss = loss * inv_n + lambda * w.squaredNorm() / Scalar(2);
  out.grad_w = X.transpose() * coeff * inv_n + lambda * w;
  out.grad_b = coeff.sum() * inv_n;
  return out;
}

// Regularization weight equivalent to the C-SVM objective 1/2|w|^2 + C sum(hinge).
inline double svm_lambda(double c, Eigen::Index n) { return 1.0 / (c * static_cast<double>(n)); }

Eigen::VectorXd label_targets(std::span<const Label> y);  // 0/1
Eigen::VectorXd label_signs(std::span<const Label> y);    // -1/+1

TrainedModel train_lr(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const Label> y, const LrParams& params,
                      std::string fingerprint = {});

TrainedModel train_svm(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const Label> y, const SvmParams& params,
                       std::string fingerprint = {});

TrainedModel train_knn(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const Label> y,
                       std::vector<std::string> ids, const KnnParams& params, std::string fingerprint = {});

// Positive-class scores in [0, 1]: sigmoid of the margin for LR and SVM, the
// positive-neighbour fraction for KNN. `fingerprint` (when non-empty) must
// match the model's.
Eigen::VectorXd predict_proba(const TrainedModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X,
                              std::string_view fingerprint = {});

std::vector<Label> predict_labels(const TrainedModel& model, const Eigen::Ref<const Eigen::MatrixXd>& X,
                                  std::string_view fingerprint = {}, double threshold = 0.5);

struct KnnVote {
  Label label = Label::NonCT;
  double score = 0.0;  // fraction of positive neighbours
};

// Majority vote of the k nearest training rows by cosine distance, distance
// ties broken by ascending id. k must be odd and <= |train|.
KnnVote knn_predict(const TrainedModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& query);

// Model files: `<path>` holds a one-line JSON manifest, `<path>.bin` the
// little-endian float64 parameter blob.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace ctn
