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


#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctn/classifiers.hpp"
#include "ctn/random.hpp"
#include "support.hpp"

using namespace ctn;
using ctn::testing::TempDir;

namespace {

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

// floor keeps exactly-zero components from turning rounding noise into large ratios
double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b)); }

// central differences on every coordinate of (w, b)
template <typename F>
double max_grad_error(F f, const Eigen::VectorXd& w, double b, const Eigen::VectorXd& gw, double gb, double h) {
  double worst = 0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    Eigen::VectorXd wp = w, wm = w;
    wp(j) += h;
    wm(j) -= h;
    worst = std::max(worst, rel_err((f(wp, b) - f(wm, b)) / (2 * h), gw(j)));
  }
  worst = std::max(worst, rel_err((f(w, b + h) - f(w, b - h)) / (2 * h), gb));
  return worst;
}

}  // namespace

TEST_CASE("logistic gradient matches finite differences") {
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    const int n = 5 + static_cast<int>(rng.bounded(30)), d = 1 + static_cast<int>(rng.bounded(8));
    const Eigen::MatrixXd X = random_matrix(rng, n, d) * 3;
    const auto y = random_labels(rng, n);
    const Eigen::VectorXd targets = label_targets(y);
    const Eigen::VectorXd w = random_matrix(rng, d, 1);
    const double b = rng.uniform() - 0.5, l2 = rng.uniform() * 0.1;
    const auto obj = logistic_objective(X, targets, w, b, l2);
    auto f = [&](const Eigen::VectorXd& ww, double bb) { return logistic_objective(X, targets, ww, bb, l2).loss; };
    CHECK(max_grad_error(f, w, b, obj.grad_w, obj.grad_b, 1e-6) < 1e-5);
  }
}

TEST_CASE("hinge gradient matches finite differences away from kinks") {
  Rng rng(12);
  int checked = 0;
  for (int t = 0; checked < 100; ++t) {
    const int n = 5 + static_cast<int>(rng.bounded(30)), d = 1 + static_cast<int>(rng.bounded(8));
    const Eigen::MatrixXd X = random_matrix(rng, n, d) * 3;
    const auto y = random_labels(rng, n);
    const Eigen::VectorXd signs = label_signs(y);
    const Eigen::VectorXd w = random_matrix(rng, d, 1);
    const double b = rng.uniform() - 0.5, lambda = rng.uniform() * 0.1;
    const Eigen::ArrayXd margin = signs.array() * ((X * w).array() + b);
    if (((margin - 1).abs() < 1e-3).any()) continue;
    ++checked;
    const auto obj = hinge_objective(X, signs, w, b, lambda);
    auto f = [&](const Eigen::VectorXd& ww, double bb) { return hinge_objective(X, signs, ww, bb, lambda).loss; };
    CHECK(max_grad_error(f, w, b, obj.grad_w, obj.grad_b, 1e-5) < 1e-4);
  }
}

TEST_CASE("objectives in long double agree with double") {
  Rng rng(13);
  const Eigen::MatrixXd X = random_matrix(rng, 20, 4);
  const auto y = random_labels(rng, 20);
  const Eigen::VectorXd t = label_targets(y);
  const Eigen::VectorXd w = random_matrix(rng, 4, 1);
  const auto d = logistic_objective(X, t, w, 0.2, 0.01);
  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const MatL XL = X.cast<long double>();
  const VecL tL = t.cast<long double>(), wL = w.cast<long double>();
  const auto l = logistic_objective(XL, tL, wL, 0.2L, 0.01L);
  CHECK(std::abs(static_cast<double>(l.loss) - d.loss) < 1e-13);
}

TEST_CASE("training separates a separable problem and is deterministic") {
  Rng rng(14);
  Eigen::MatrixXd X(60, 3);
  std::vector<Label> y;
  for (int i = 0; i < 60; ++i) {
    const bool ct = i % 2 == 0;
    for (int j = 0; j < 3; ++j) X(i, j) = rng.uniform() * 0.5 + (ct ? 0.5 : -1.0) * (j == 0 ? 1 : 0.2);
    y.push_back(ct ? Label::CT : Label::NonCT);
  }
  LrParams lp;
  lp.epochs = 500;
  const auto a = train_lr(X, y, lp), b = train_lr(X, y, lp);
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
  CHECK(a.loss_trace.back() < a.loss_trace.front());
  CHECK(predict_labels(a, X) == y);
  SvmParams sp;
  sp.epochs = 500;
  const auto s = train_svm(X, y, sp);
  CHECK(predict_labels(s, X) == y);
  const auto p = predict_proba(a, X);
  CHECK((p.array() >= 0).all());
  CHECK((p.array() <= 1).all());
}

TEST_CASE("training rejects degenerate input") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 2);
  const std::vector<Label> one{Label::CT, Label::CT, Label::CT, Label::CT};
  try {
    train_lr(X, one, {});
    FAIL("expected degenerate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate);
  }
  CHECK_THROWS_AS(train_svm(X, one, {}), Error);
  const std::vector<Label> three{Label::CT, Label::NonCT, Label::CT};
  try {
    train_lr(X, three, {});
    FAIL("expected dimension");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dimension);
  }
  X(0, 0) = std::nan("");
  CHECK_THROWS_AS(train_lr(X, std::vector<Label>{Label::CT, Label::NonCT, Label::CT, Label::NonCT}, {}), Error);
}

TEST_CASE("knn matches brute-force cosine vote") {
  Rng rng(15);
  for (int t = 0; t < 200; ++t) {
    const int n = 5 + static_cast<int>(rng.bounded(40)), d = 2 + static_cast<int>(rng.bounded(6));
    const Eigen::MatrixXd X = random_matrix(rng, n, d);
    const auto y = random_labels(rng, n);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("t" + std::to_string(i));
    const int k = 1 + 2 * static_cast<int>(rng.bounded(static_cast<std::uint64_t>((std::min(n, 9) + 1) / 2)));
    const auto model = train_knn(X, y, ids, KnnParams{k});
    const Eigen::RowVectorXd q = random_matrix(rng, 1, d);
    std::vector<std::pair<long double, std::size_t>> dist;
    for (int i = 0; i < n; ++i) {
      long double dot = 0, a = 0, b = 0;
      for (int j = 0; j < d; ++j) {
        dot += static_cast<long double>(X(i, j)) * q(j);
        a += static_cast<long double>(X(i, j)) * X(i, j);
        b += static_cast<long double>(q(j)) * q(j);
      }
      dist.push_back({1 - dot / std::sqrt(a * b), static_cast<std::size_t>(i)});
    }
    std::sort(dist.begin(), dist.end());
    int pos = 0;
    for (int i = 0; i < k; ++i) pos += y[dist[static_cast<std::size_t>(i)].second] == Label::CT;
    const auto vote = knn_predict(model, q);
    CHECK(vote.score == doctest::Approx(static_cast<double>(pos) / k));
    CHECK(vote.label == (2 * pos > k ? Label::CT : Label::NonCT));
  }
}

TEST_CASE("knn parameter errors and tie-break by id") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 0, 1, 0, 0, 1, 0, 1;
  const std::vector<Label> y{Label::CT, Label::NonCT, Label::CT, Label::NonCT};
  CHECK_THROWS_AS(train_knn(X, y, {"a", "b", "c", "d"}, KnnParams{2}), Error);
  CHECK_THROWS_AS(train_knn(X, y, {"a", "b", "c", "d"}, KnnParams{5}), Error);
  // two identical nearest points; the lower id wins the single slot
  auto m = train_knn(X, y, {"b", "a", "c", "d"}, KnnParams{1});
  CHECK(knn_predict(m, Eigen::RowVector2d(1, 0)).label == Label::NonCT);
  m = train_knn(X, y, {"a", "b", "c", "d"}, KnnParams{1});
  CHECK(knn_predict(m, Eigen::RowVector2d(1, 0)).label == Label::CT);
  CHECK_THROWS_AS(knn_predict(m, Eigen::RowVector3d(1, 0, 0)), Error);
}

TEST_CASE("fingerprint and dimension checks at apply time") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 0, 0.9, 0.1, 0, 1, 0.1, 0.9;
  const std::vector<Label> y{Label::CT, Label::CT, Label::NonCT, Label::NonCT};
  const auto m = train_lr(X, y, {}, "mock/m/2");
  CHECK_NOTHROW(predict_proba(m, X, "mock/m/2"));
  try {
    predict_proba(m, X, "other/m/2");
    FAIL("expected integrity");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::integrity);
  }
  try {
    predict_proba(m, Eigen::MatrixXd::Ones(2, 3));
    FAIL("expected dimension");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dimension);
  }
}

TEST_CASE("model save and load round trip") {
  TempDir dir("model");
  Rng rng(16);
  const Eigen::MatrixXd X = random_matrix(rng, 30, 5);
  const auto y = random_labels(rng, 30);
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) ids.push_back("m" + std::to_string(i));
  for (const auto& model :
       {train_lr(X, y, {}, "fp"), train_svm(X, y, {}, "fp"), train_knn(X, y, ids, KnnParams{3}, "fp")}) {
    const auto path = dir / (std::string(to_string(model.kind)) + ".json");
    save_model(model, path);
    const auto back = load_model(path);
    CHECK(back.kind == model.kind);
    CHECK(back.fingerprint == "fp");
    CHECK(predict_proba(back, X) == predict_proba(model, X));
  }
  CHECK_THROWS_AS(load_model(dir / "missing.json"), Error);
  CHECK(parse_model_kind("svm") == ModelKind::LinearSVM);
  CHECK_THROWS_AS(parse_model_kind("tree"), Error);
}
