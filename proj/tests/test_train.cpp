#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "faux/dataset.hpp"
#include "faux/errors.hpp"
#include "faux/mlp.hpp"
#include "faux/rng.hpp"
#include "faux/train.hpp"
#include "faux/types.hpp"

using namespace faux;

namespace {

// Linearly separable binary problem: y = 1 iff x . w > 0, margin ~N(0,1).
void separable_data(Index n, Index d, std::uint64_t seed, Matrix& x, Matrix& y) {
  Rng rng(seed);
  Vector w(d);
  for (Index i = 0; i < d; ++i) w(i) = rng.normal();
  x.resize(n, d);
  y.resize(n, 1);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < d; ++c) x(r, c) = rng.normal();
    y(r, 0) = x.row(r).dot(w) > 0.0 ? 1.0 : 0.0;
  }
}

Dataset toy_dataset(Index n, std::uint64_t seed) {
  Matrix x, y;
  separable_data(n, 4, seed, x, y);
  Dataset data;
  data.features = x;
  data.labels = y.col(0);
  // Protected attribute correlates with feature 0.
  data.protected_attrs.resize(n, 1);
  for (Index r = 0; r < n; ++r) data.protected_attrs(r, 0) = x(r, 0) > 0.0 ? 1.0 : 0.0;
  data.column_names = {"x0", "x1", "x2", "x3"};
  data.protected_names = {"c0"};
  return data;
}

}  // namespace

TEST_CASE("make_mlp shapes, Glorot bounds, zero biases, head selection") {
  Rng rng(4);
  MlpModel m = make_mlp(6, {10, 4}, 1, rng);
  REQUIRE(m.layers.size() == 3);
  CHECK(m.input_dim == 6);
  CHECK(m.layers[0].weights.rows() == 10);
  CHECK(m.layers[0].weights.cols() == 6);
  CHECK(m.layers[1].weights.rows() == 4);
  CHECK(m.layers[2].weights.rows() == 1);
  CHECK(m.layers[0].activation == Activation::kRelu);
  CHECK(m.layers[1].activation == Activation::kRelu);
  CHECK(m.layers[2].activation == Activation::kSigmoid);
  for (const Layer& layer : m.layers) {
    CHECK(layer.bias.cwiseAbs().maxCoeff() == 0.0);
    const double bound =
        std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    CHECK(layer.weights.cwiseAbs().maxCoeff() <= bound);
  }
  Rng rng2(4);
  MlpModel multi = make_mlp(3, {}, 5, rng2);
  CHECK(multi.layers.size() == 1);
  CHECK(multi.head() == Activation::kSoftmax);

  Rng rng3(4);
  CHECK_THROWS_AS(make_mlp(0, {4}, 1, rng3), ValidationError);
  CHECK_THROWS_AS(make_mlp(4, {0}, 1, rng3), ValidationError);
}

TEST_CASE("training is bit-deterministic in the seed") {
  Matrix x, y;
  separable_data(300, 4, 11, x, y);
  TrainConfig cfg;
  cfg.max_epochs = 8;
  cfg.seed = 99;
  Rng ra(1), rb(1), rc(2);
  MlpModel init_a = make_mlp(4, {8}, 1, ra);
  MlpModel init_b = make_mlp(4, {8}, 1, rb);
  TrainResult a = train(init_a, x, y, cfg);
  TrainResult b = train(init_b, x, y, cfg);
  CHECK(model_to_json(a.model) == model_to_json(b.model));
  CHECK(a.best_val_loss == b.best_val_loss);
  CHECK(a.epochs_run == b.epochs_run);

  MlpModel init_c = make_mlp(4, {8}, 1, rc);
  TrainResult c = train(init_c, x, y, cfg);
  CHECK(model_to_json(a.model) != model_to_json(c.model));
}

TEST_CASE("early stopping respects patience and max_epochs") {
  Matrix x, y;
  separable_data(200, 3, 5, x, y);
  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.patience = 4;
  cfg.seed = 3;
  Rng rng(8);
  MlpModel init = make_mlp(3, {6}, 1, rng);
  TrainResult res = train(init, x, y, cfg);
  CHECK(res.epochs_run <= cfg.max_epochs);
  CHECK(res.epochs_run <= res.best_epoch + cfg.patience);
  CHECK(res.best_epoch <= res.epochs_run);
}

TEST_CASE("max_epochs 0 returns the initialization") {
  Matrix x, y;
  separable_data(50, 3, 6, x, y);
  TrainConfig cfg;
  cfg.max_epochs = 0;
  Rng rng(8);
  MlpModel init = make_mlp(3, {6}, 1, rng);
  TrainResult res = train(init, x, y, cfg);
  CHECK(model_to_json(res.model) == model_to_json(init));
  CHECK(res.epochs_run == 0);
  CHECK(res.best_epoch == 0);
}

TEST_CASE("separable data trains to high accuracy") {
  Matrix x, y;
  separable_data(600, 4, 21, x, y);
  TrainConfig cfg;
  cfg.max_epochs = 80;
  cfg.learning_rate = 0.01;
  cfg.seed = 7;
  Rng rng(2);
  MlpModel init = make_mlp(4, {16}, 1, rng);
  TrainResult res = train(init, x, y, cfg);
  CHECK(res.train_accuracy >= 0.9);
  CHECK(res.val_accuracy >= 0.9);
}

TEST_CASE("absurd learning rate raises DivergenceError") {
  Matrix x, y;
  separable_data(200, 4, 13, x, y);
  TrainConfig cfg;
  cfg.max_epochs = 50;
  cfg.learning_rate = 1e300;
  cfg.seed = 1;
  Rng rng(6);
  MlpModel init = make_mlp(4, {8}, 1, rng);
  CHECK_THROWS_AS(train(init, x, y, cfg), DivergenceError);
}

TEST_CASE("train on a dataset by role") {
  Dataset data = toy_dataset(400, 31);
  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.learning_rate = 0.01;
  cfg.seed = 5;
  Rng rng(9);
  MlpModel init = make_mlp(4, {12}, 1, rng);
  TrainResult label_run = train(init, data, TargetRole::kLabel, cfg);
  CHECK(label_run.val_accuracy >= 0.85);
  TrainResult prot_run = train(init, data, TargetRole::kProtected, cfg);
  CHECK(prot_run.val_accuracy >= 0.85);
}

TEST_CASE("adversarial training with alpha 0 equals plain training") {
  Dataset data = toy_dataset(300, 17);
  TrainConfig cfg;
  cfg.max_epochs = 10;
  cfg.seed = 23;
  Rng rng(14);
  MlpModel init = make_mlp(4, {8}, 1, rng);
  AdversaryConfig adv;
  adv.alpha = 0.0;
  TrainResult plain = train(init, data, TargetRole::kLabel, cfg);
  TrainResult debiased = train_adversarial(init, data, cfg, adv);
  CHECK(model_to_json(plain.model) == model_to_json(debiased.model));
  CHECK(plain.best_val_loss == debiased.best_val_loss);
}

TEST_CASE("adversarial training with positive alpha runs and differs") {
  Dataset data = toy_dataset(300, 17);
  TrainConfig cfg;
  cfg.max_epochs = 10;
  cfg.seed = 23;
  Rng rng(14);
  MlpModel init = make_mlp(4, {8}, 1, rng);
  AdversaryConfig adv;
  adv.alpha = 50.0;
  TrainResult plain = train(init, data, TargetRole::kLabel, cfg);
  TrainResult debiased = train_adversarial(init, data, cfg, adv);
  CHECK(model_to_json(plain.model) != model_to_json(debiased.model));
  // Determinism of the adversarial path too.
  TrainResult again = train_adversarial(init, data, cfg, adv);
  CHECK(model_to_json(debiased.model) == model_to_json(again.model));
}

TEST_CASE("fit_logistic reaches a local optimum of the penalized loss") {
  Matrix x, y;
  separable_data(250, 3, 41, x, y);
  Vector targets = y.col(0);
  const double lambda = 1.0;
  LinearModel fit = fit_logistic(x, targets, lambda);

  const auto loss = [&](const Vector& w, double b) {
    double total = 0.0;
    for (Index r = 0; r < x.rows(); ++r) {
      const double z = x.row(r).dot(w) + b;
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double clipped = std::min(std::max(p, 1e-15), 1.0 - 1e-15);
      total -= targets(r) * std::log(clipped) + (1 - targets(r)) * std::log(1 - clipped);
    }
    return total / static_cast<double>(x.rows()) + 0.5 * lambda * w.squaredNorm();
  };

  const double at_fit = loss(fit.weights, fit.bias);
  Rng rng(50);
  for (int trial = 0; trial < 20; ++trial) {
    Vector dw(3);
    for (Index i = 0; i < 3; ++i) dw(i) = 1e-3 * rng.normal();
    CHECK(at_fit <= loss(fit.weights + dw, fit.bias + 1e-3 * rng.normal()) + 1e-9);
  }

  // Stronger penalty shrinks the weights.
  LinearModel tight = fit_logistic(x, targets, 100.0);
  CHECK(tight.weights.norm() < fit.weights.norm());
}

TEST_CASE("training input validation") {
  Rng rng(1);
  MlpModel init = make_mlp(3, {4}, 1, rng);
  TrainConfig cfg;
  Matrix x = Matrix::Zero(10, 2);  // wrong width
  Matrix y = Matrix::Zero(10, 1);
  CHECK_THROWS_AS(train(init, x, y, cfg), ValidationError);

  Matrix x_ok = Matrix::Zero(10, 3);
  Matrix y_bad = Matrix::Zero(9, 1);  // row mismatch
  CHECK_THROWS_AS(train(init, x_ok, y_bad, cfg), ValidationError);

  Matrix y_value = Matrix::Zero(10, 1);
  y_value(0, 0) = 0.5;  // not binary
  CHECK_THROWS_AS(train(init, x_ok, y_value, cfg), ValidationError);

  TrainConfig bad = cfg;
  bad.learning_rate = 0.0;
  Matrix y_ok = Matrix::Zero(10, 1);
  y_ok(0, 0) = 1.0;
  CHECK_THROWS_AS(train(init, x_ok, y_ok, bad), ValidationError);

  bad = cfg;
  bad.patience = 0;
  CHECK_THROWS_AS(train(init, x_ok, y_ok, bad), ValidationError);
}
