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

#include <cmath>

#include "ctn/evaluation.hpp"
#include "ctn/random.hpp"
#include "ctn/sampling.hpp"

using namespace ctn;

TEST_CASE("threshold is strict") {
  const std::vector<double> s{0.5, 0.50000001, 0.2, 0.9};
  const std::vector<Label> y{Label::CT, Label::CT, Label::NonCT, Label::NonCT};
  const auto c = compute_confusion(s, y);
  CHECK(c == Confusion{1, 1, 1, 1});
  CHECK(compute_confusion(s, y, 0.0) == Confusion{2, 2, 0, 0});
  CHECK_THROWS_AS(compute_confusion(std::vector<double>{0.1}, y), Error);
}

TEST_CASE("metrics from a hand table") {
  const auto m = metrics_from_confusion({30, 10, 50, 20});
  CHECK(m.precision == doctest::Approx(0.75));
  CHECK(m.recall == doctest::Approx(0.6));
  CHECK(m.f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35));
  CHECK_FALSE(m.precision_undefined);
}

TEST_CASE("undefined precision and recall are flagged") {
  const std::vector<double> s{0.1, 0.2, 0.3};
  const std::vector<Label> y{Label::NonCT, Label::NonCT, Label::NonCT};
  const auto m = binary_metrics(s, y);
  CHECK(m.precision_undefined);
  CHECK(m.recall_undefined);
  CHECK(m.precision == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK_FALSE(m.auc.has_value());
}

TEST_CASE("summary uses sample standard deviation") {
  const std::vector<double> v{1, 2, 3, 4};
  const auto s = summarize(v);
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(summarize(std::vector<double>{7}).std == 0.0);
}

TEST_CASE("cross validation is deterministic and round trips through JSON") {
  Rng rng(21);
  const int n = 100;
  Eigen::MatrixXd X(n, 4);
  std::vector<Label> y;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    const bool ct = i % 3 == 0;
    for (int j = 0; j < 4; ++j) X(i, j) = rng.uniform() - 0.5 + (ct && j == 0 ? 0.6 : 0.0);
    y.push_back(ct ? Label::CT : Label::NonCT);
    ids.push_back("e" + std::to_string(i));
  }
  std::vector<int> folds(n);
  for (int i = 0; i < n; ++i) folds[static_cast<std::size_t>(i)] = i % 5;
  ModelSpec spec;
  spec.lr.epochs = 300;
  const auto a = evaluate_cv(spec, ids, X, y, folds, "cv5");
  const auto b = evaluate_cv(spec, ids, X, y, folds, "cv5");
  CHECK(a.to_json() == b.to_json());
  CHECK(a.folds.size() == 5);
  CHECK(a.auc.n == 5);
  CHECK(a.f1.mean > 0.5);
  std::size_t total = 0;
  for (const auto& f : a.folds) total += f.n;
  CHECK(total == 100);
  CHECK(a.pooled.confusion.total() == 100);

  const auto back = MetricsReport::from_json(a.to_json());
  CHECK(back.to_json() == a.to_json());
  CHECK(a.to_markdown().find("| lr |") != std::string::npos);
  CHECK_THROWS_AS(MetricsReport::from_json("{"), Error);
}

TEST_CASE("hyperparameters") {
  ModelSpec spec;
  spec.kind = ModelKind::KNN;
  apply_hyperparameter(spec, "k", "7");
  CHECK(spec.model_id() == "knn-k7");
  CHECK_THROWS_AS(apply_hyperparameter(spec, "depth", "3"), Error);
  CHECK_THROWS_AS(apply_hyperparameter(spec, "k", "seven"), Error);
}
