#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "uplift/gbdt.hpp"
#include "uplift/rng.hpp"

using namespace uplift;

namespace {

// Exhaustive pair-counting AUC: ties in score count one half.
double ranking_auc(const Vector& score, const std::vector<int>& label) {
  double pairs = 0.0, wins = 0.0;
  const Index n = score.size();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (label[static_cast<std::size_t>(i)] == 1 && label[static_cast<std::size_t>(j)] == 0) {
        pairs += 1.0;
        if (score[i] > score[j]) wins += 1.0;
        else if (score[i] == score[j]) wins += 0.5;
      }
    }
  }
  return wins / pairs;
}

Matrix random_matrix(Index n, Index d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) x(i, j) = rng.uniform();
  return x;
}

}  // namespace

TEST_CASE("constant target yields a base-score-only model") {
  const Matrix x = random_matrix(40, 3, 1);
  const Vector y = Vector::Constant(40, 3.0);
  const GbdtModel m = fit_gbdt(x, y, GbdtParams{});
  CHECK(m.trees.empty());
  CHECK(m.base_score == 3.0);
  const Vector pred = m.predict(x);
  CHECK((pred.array() == 3.0).all());
}

TEST_CASE("single-row training degenerates to the row's value") {
  Matrix x(1, 2);
  x << 0.3, 0.7;
  Vector y(1);
  y << -1.25;
  const GbdtModel m = fit_gbdt(x, y, GbdtParams{});
  CHECK(m.trees.empty());
  CHECK(m.base_score == -1.25);
}

TEST_CASE("boosting drives training error below 0.01 on a noiseless signal") {
  const Index n = 500;
  const Matrix x = random_matrix(n, 4, 2);
  const Vector y = x.col(0);
  GbdtParams p;  // depth 3, 100 rounds, lr 0.1
  const GbdtModel m = fit_gbdt(x, y, p);
  const Vector pred = m.predict(x);
  const double mse = (pred - y).squaredNorm() / static_cast<double>(n);
  CHECK(mse < 0.01);
  CHECK(m.train_mse.back() == doctest::Approx(mse).epsilon(1e-9));
}

TEST_CASE("training error is non-increasing round by round") {
  const Matrix x = random_matrix(300, 5, 3);
  Rng rng(4);
  Vector y(300);
  for (Index i = 0; i < 300; ++i) y[i] = std::sin(6.0 * x(i, 0)) + 0.3 * rng.normal();
  const GbdtModel m = fit_gbdt(x, y, GbdtParams{});
  REQUIRE(m.train_mse.size() >= 2);
  for (std::size_t r = 1; r < m.train_mse.size(); ++r) {
    CHECK(m.train_mse[r] <= m.train_mse[r - 1] + 1e-12);
  }
}

TEST_CASE("base-score-only model predicts the base score everywhere") {
  GbdtModel m;
  m.base_score = 0.42;
  m.n_features = 2;
  const Matrix x = random_matrix(5, 2, 5);
  const SoftLabels s = predict_soft(m, x);
  CHECK((s.y_hat.array() == 0.42).all());
}

TEST_CASE("binary-target predictions are clamped into the open unit interval") {
  GbdtModel m;
  m.base_score = 1.3;  // deliberately outside [0, 1]
  m.binary_target = true;
  m.n_features = 1;
  Matrix x(2, 1);
  x << 0.0, 1.0;
  const SoftLabels s = predict_soft(m, x);
  CHECK(s.y_hat[0] == 1.0 - 1e-6);
  m.base_score = -0.2;
  const SoftLabels lo = predict_soft(m, x);
  CHECK(lo.y_hat[0] == 1e-6);
}

TEST_CASE("a binary training target marks the model and clamps scores") {
  const Matrix x = random_matrix(200, 3, 6);
  Vector y(200);
  for (Index i = 0; i < 200; ++i) y[i] = x(i, 0) > 0.5 ? 1.0 : 0.0;
  const GbdtModel m = fit_gbdt(x, y, GbdtParams{});
  CHECK(m.binary_target);
  const SoftLabels s = predict_soft(m, x);
  CHECK(s.y_hat.minCoeff() >= 1e-6);
  CHECK(s.y_hat.maxCoeff() <= 1.0 - 1e-6);
}

TEST_CASE("prediction is pure: same model, same rows, same bits") {
  const Matrix x = random_matrix(50, 3, 7);
  Rng rng(8);
  Vector y(50);
  for (Index i = 0; i < 50; ++i) y[i] = rng.normal();
  const GbdtModel m = fit_gbdt(x, y, GbdtParams{});
  const SoftLabels a = predict_soft(m, x);
  const SoftLabels b = predict_soft(m, x);
  CHECK(a.y_hat == b.y_hat);
}

TEST_CASE("column mismatch is a shape error") {
  const Matrix x = random_matrix(30, 3, 9);
  const Vector y = x.col(1);
  const GbdtModel m = fit_gbdt(x, y, GbdtParams{});
  const Matrix narrow = random_matrix(30, 2, 10);
  CHECK_THROWS_AS(predict_soft(m, narrow), shape_error);
}

TEST_CASE("refitting the same data reproduces the model bit for bit") {
  const Matrix x = random_matrix(120, 4, 11);
  Rng rng(12);
  Vector y(120);
  for (Index i = 0; i < 120; ++i) y[i] = x(i, 2) * 2.0 + 0.1 * rng.normal();
  const GbdtModel a = fit_gbdt(x, y, GbdtParams{});
  const GbdtModel b = fit_gbdt(x, y, GbdtParams{});
  CHECK(gbdt_to_json(a) == gbdt_to_json(b));
}

TEST_CASE("JSON round-trip preserves predictions exactly") {
  const Matrix x = random_matrix(150, 4, 13);
  Rng rng(14);
  Vector y(150);
  for (Index i = 0; i < 150; ++i)
    y[i] = std::sin(3.0 * x(i, 0)) + x(i, 1) * x(i, 3) + 0.05 * rng.normal();
  const GbdtModel m = fit_gbdt(x, y, GbdtParams{});
  REQUIRE(!m.trees.empty());
  const std::string text = gbdt_to_json(m);
  const GbdtModel back = gbdt_from_json(text);
  CHECK(back.predict(x) == m.predict(x));
  CHECK(back.base_score == m.base_score);
  CHECK(back.binary_target == m.binary_target);
  CHECK(gbdt_to_json(back) == text);
}

TEST_CASE("gbdt_from_json rejects foreign documents") {
  CHECK_THROWS_AS(gbdt_from_json("{}"), schema_error);
  CHECK_THROWS_AS(gbdt_from_json("not json"), schema_error);
}

TEST_CASE("soft labels separate a thresholded binary toy with AUC at least 0.95") {
  const Index n = 1000;
  const Matrix x = random_matrix(n, 3, 15);
  Vector y(n);
  std::vector<int> label(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    label[static_cast<std::size_t>(i)] = x(i, 0) > 0.5 ? 1 : 0;
    y[i] = label[static_cast<std::size_t>(i)];
  }
  const GbdtModel m = fit_gbdt(x, y, GbdtParams{});
  const SoftLabels s = predict_soft(m, x);
  CHECK(ranking_auc(s.y_hat, label) >= 0.95);
}

TEST_CASE("min_samples_leaf is respected at the root") {
  // Too few rows to satisfy both children: no split is legal, so the model
  // stays at the base score.
  Matrix x(10, 1);
  Vector y(10);
  for (Index i = 0; i < 10; ++i) {
    x(i, 0) = static_cast<double>(i);
    y[i] = i < 5 ? 0.0 : 1.0;
  }
  GbdtParams p;
  p.min_samples_leaf = 8;
  const GbdtModel m = fit_gbdt(x, y, p);
  CHECK(m.trees.empty());
  CHECK(m.base_score == 0.5);
}
