#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "faux/errors.hpp"
#include "faux/mlp.hpp"
#include "faux/rng.hpp"
#include "faux/scores.hpp"
#include "faux/synth.hpp"
#include "faux/train.hpp"
#include "faux/types.hpp"

using namespace faux;

namespace {

// Identity-head linear model: f(x) = W x + b, gradients are exactly W.
MlpModel linear_model(const Matrix& w, const Vector& b) {
  MlpModel m;
  m.input_dim = w.cols();
  Layer out;
  out.weights = w;
  out.bias = b;
  out.activation = Activation::kIdentity;
  m.layers = {out};
  return m;
}

MlpModel linear_row(const Vector& w, double b = 0.0,
                    Activation head = Activation::kIdentity) {
  Matrix mat = w.transpose();
  MlpModel m = linear_model(mat, Vector::Constant(1, b));
  m.layers[0].activation = head;
  return m;
}

Dataset tiny_data(const Matrix& x, const Vector& c) {
  Dataset data;
  data.features = x;
  data.labels = Vector::Zero(x.rows());
  data.protected_attrs = c;
  data.column_names.clear();
  for (Index j = 0; j < x.cols(); ++j) data.column_names.push_back("x" + std::to_string(j));
  data.protected_names = {"c0"};
  return data;
}

}  // namespace

TEST_CASE("score_faux closed-form examples") {
  Vector x(2);
  x << 0.3, -0.8;  // gradients of identity-head linear models ignore x

  Vector gt(2), ga(2);
  gt << 1, 0;
  ga << 0, 2;
  MlpModel tar = linear_row(gt);
  MlpModel aux = linear_row(ga);
  CHECK(score_faux(tar, aux, x) == 0.0);

  gt << 2, 0;
  ga << 1, 0;
  CHECK(score_faux(linear_row(gt), linear_row(ga), x) ==
        doctest::Approx(2.0).epsilon(1e-8));

  gt << 1, 1;
  ga << 3, 4;
  CHECK(score_faux(linear_row(gt), linear_row(ga), x) ==
        doctest::Approx(0.28).epsilon(1e-8));
}

TEST_CASE("score_faux_from_grads agrees with the k=1 closed form") {
  Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    Vector gt(4), ga(4);
    for (Index i = 0; i < 4; ++i) {
      gt(i) = rng.normal();
      ga(i) = rng.normal();
    }
    Matrix jac = ga.transpose();
    const double via_gram = score_faux_from_grads(gt, jac);
    const double closed = std::abs(gt.dot(ga)) / (ga.squaredNorm() + kEpsRidge);
    CHECK(via_gram == doctest::Approx(closed).epsilon(1e-12));
  }
}

TEST_CASE("score_faux k>1 matches an independent full-pivot solve") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Index k = 2 + static_cast<Index>(rng.uniform_int(3));
    const Index d = 6;
    Matrix jac(k, d);
    Vector gt(d);
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j < d; ++j) jac(i, j) = rng.normal();
    for (Index j = 0; j < d; ++j) gt(j) = rng.normal();

    Matrix gram = jac * jac.transpose() + kEpsRidge * Matrix::Identity(k, k);
    Vector w = Eigen::FullPivLU<Matrix>(gram).solve((jac * gt).eval());
    const double expect = w.cwiseAbs().maxCoeff();
    CHECK(score_faux_from_grads(gt, jac) == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("degenerate auxiliary gradients give score 0 and set the flag") {
  Vector x(3);
  x << 1, 2, 3;
  Vector gt(3);
  gt << 1, -1, 2;
  Vector zero = Vector::Zero(3);
  bool degenerate = false;
  const double s = score_faux(linear_row(gt), linear_row(zero), x,
                              GradientSpace::kProbability, &degenerate);
  CHECK(s == 0.0);
  CHECK(degenerate);

  degenerate = true;
  score_faux(linear_row(gt), linear_row(gt), x, GradientSpace::kProbability, &degenerate);
  CHECK(!degenerate);
}

TEST_CASE("score_faux_ng is the absolute cosine, maxed over aux outputs") {
  Vector x(2);
  x << 5.0, -3.0;
  Vector gt(2), ga(2);
  gt << 1, 1;
  ga << 3, 4;
  const double expect = 7.0 / (5.0 * std::sqrt(2.0));
  CHECK(score_faux_ng(linear_row(gt), linear_row(ga), x) ==
        doctest::Approx(expect).epsilon(1e-12));

  // Cosine is invariant to gradient magnitude: sigmoid heads rescale both
  // gradients by sigma' but leave the score unchanged.
  CHECK(score_faux_ng(linear_row(gt, 0.0, Activation::kSigmoid),
                      linear_row(ga, 0.0, Activation::kSigmoid), x) ==
        doctest::Approx(expect).epsilon(1e-9));

  // Multi-output aux: max over rows.
  Matrix wa(2, 2);
  wa << 3, 4,  // cos ~ 0.9899
      1, 1;    // cos = 1
  MlpModel aux2 = linear_model(wa, Vector::Zero(2));
  CHECK(score_faux_ng(linear_row(gt), aux2, x) == doctest::Approx(1.0).epsilon(1e-12));

  // Zero gradient on either side scores 0.
  Vector zero = Vector::Zero(2);
  CHECK(score_faux_ng(linear_row(zero), linear_row(ga), x) == 0.0);
  CHECK(score_faux_ng(linear_row(gt), linear_row(zero), x) == 0.0);
}

TEST_CASE("score_faux_ig basics") {
  Vector x(3), base(3);
  x << 1.0, -2.0, 0.5;
  base.setZero();
  Vector w(3);
  w << 0.4, 1.2, -0.7;

  // Same model on both sides: normalized (cosine) IG alignment ~ 1.
  CHECK(score_faux_ig(linear_row(w), linear_row(w), x, base, 64) ==
        doctest::Approx(1.0).epsilon(1e-6));

  // x == baseline: both IG vectors vanish. The normalized form scores 0;
  // the pseudoinverse form scores 0 and reports the degeneracy.
  CHECK(score_faux_ig(linear_row(w), linear_row(w), x, x, 64) == 0.0);
  bool degenerate = false;
  CHECK(score_faux_ig(linear_row(w), linear_row(w), x, x, 64, IgForm::kPseudoinverse,
                      GradientSpace::kProbability, &degenerate) == 0.0);
  CHECK(degenerate);

  // Identity-head linear models have IG exactly w .* (x - baseline), so both
  // forms have closed-form values.
  Vector w2(3);
  w2 << -0.3, 0.8, 0.1;
  const Vector ig_t = w.cwiseProduct(x - base);
  const Vector ig_a = w2.cwiseProduct(x - base);
  const double normalized =
      score_faux_ig(linear_row(w), linear_row(w2), x, base, 64, IgForm::kNormalized);
  CHECK(normalized ==
        doctest::Approx(std::abs(ig_t.dot(ig_a)) / (ig_t.norm() * ig_a.norm()))
            .epsilon(1e-9));
  const double pinv =
      score_faux_ig(linear_row(w), linear_row(w2), x, base, 64, IgForm::kPseudoinverse);
  CHECK(pinv == doctest::Approx(std::abs(ig_t.dot(ig_a)) /
                                (ig_a.squaredNorm() + kEpsRidge))
                    .epsilon(1e-9));

  CHECK_THROWS_AS(score_faux_ig(linear_row(w), linear_row(w2), x, base, 0),
                  ValidationError);
}

TEST_CASE("score_fta norms at the sigmoid midpoint") {
  Vector w(2);
  w << 3, 4;
  // Choose x with w . x + b = 0 so the probability-space factor is exactly 1/4.
  MlpModel tar = linear_row(w, -10.0, Activation::kSigmoid);
  Vector x(2);
  x << 2.0, 1.0;  // 3*2 + 4*1 - 10 = 0
  CHECK(score_fta(tar, x, FtaNorm::kL2) == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(score_fta(tar, x, FtaNorm::kL1) == doctest::Approx(1.75).epsilon(1e-12));
  CHECK(score_fta(tar, x, FtaNorm::kLinf) == doctest::Approx(1.0).epsilon(1e-12));
  // Logit space drops the sigmoid factor.
  CHECK(score_fta(tar, x, FtaNorm::kL2, GradientSpace::kLogit) ==
        doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("score_fta_weighted projects onto the unit attribute direction") {
  Vector wt(2);
  wt << 1.4, -777.0;
  LinearModel lin;
  lin.weights = Vector(2);
  lin.weights << 2.0, 0.0;  // unit direction (1, 0)
  lin.bias = 0.3;
  Vector x(2);
  x << 0.0, 0.0;
  CHECK(score_fta_weighted(linear_row(wt), lin, x) ==
        doctest::Approx(1.4).epsilon(1e-12));

  LinearModel degenerate;
  degenerate.weights = Vector::Zero(2);
  CHECK_THROWS_AS(score_fta_weighted(linear_row(wt), degenerate, x), ValidationError);
}

TEST_CASE("score_unfair_map zero-step and orthogonal cases") {
  Vector wt(2);
  wt << 0.0, 1.0;
  LinearModel lin;
  lin.weights = Vector(2);
  lin.weights << 1.0, 0.0;
  Vector x(2);
  x << 0.2, 0.4;
  Vector lo = Vector::Constant(2, -10.0), hi = Vector::Constant(2, 10.0);

  UnfairMapConfig none;
  none.steps = 0;
  CHECK(score_unfair_map(linear_row(wt), lin, x, none, lo, hi) == 0.0);

  UnfairMapConfig cfg;  // defaults: 100 steps
  // Attack moves along (1, 0); the target only reads coordinate 1.
  CHECK(score_unfair_map(linear_row(wt), lin, x, cfg, lo, hi) == 0.0);

  CHECK_THROWS_AS(score_unfair_map(linear_row(wt), LinearModel{Vector::Zero(2), 0.0}, x,
                                   cfg, lo, hi),
                  ValidationError);
}

TEST_CASE("score_unfair_map matches an in-test replay of the flow") {
  Rng rng(33);
  MlpModel tar = make_mlp(3, {6}, 1, rng);
  LinearModel lin;
  lin.weights = Vector(3);
  lin.weights << 0.8, -0.4, 0.2;
  lin.bias = 0.0;
  Vector x(3);
  x << 0.1, -0.2, 0.3;
  Vector lo = Vector::Constant(3, -2.0), hi = Vector::Constant(3, 2.0);
  UnfairMapConfig cfg;
  cfg.steps = 40;
  cfg.step_size = 0.05;
  cfg.subspace_reg = 10.0;

  const Vector unit = lin.weights / lin.weights.norm();
  const double f0 = forward(tar, x)(0);
  Vector point = x;
  for (int t = 0; t < cfg.steps; ++t) {
    const Vector g = input_gradient(tar, point, 0, false);
    const double along = g.dot(unit);
    const double gnorm2 = g.squaredNorm();
    double scale = 0.0;
    if (gnorm2 > kEpsNorm * kEpsNorm) {
      const double cos2 = (along * along) / gnorm2;
      scale = along / (1.0 + cfg.subspace_reg * (1.0 - cos2));
    }
    point += cfg.step_size * scale * unit;
    point = point.cwiseMax(lo).cwiseMin(hi);
  }
  const double expect = std::abs(forward(tar, point)(0) - f0);
  CHECK(score_unfair_map(tar, lin, x, cfg, lo, hi) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("score_lic_ub contracts the generator Jacobian with the gradient") {
  SyntheticSpec spec;
  Rng prng(1234567);
  spec.y_block = make_gaussian_block(prng, 4, 2, 0.5, 1.0);
  spec.c_block = make_gaussian_block(prng, 3, 2, 0.5, 1.0);
  spec.p_c1 = spec.p_y1 = 0.5;
  spec.bias = 0.5;
  spec.n_samples = 15;
  spec.seed = 8;
  spec.param_seed = 1234567;
  SampleResult out = sample_dataset(spec);

  Vector wt(7);
  wt << 0.3, -0.1, 0.2, 0.5, -0.4, 0.6, -0.2;
  MlpModel tar = linear_row(wt);
  for (const RowProvenance& row : out.provenance) {
    Matrix dxdc = true_dxdc(spec, row);
    const double expect = std::abs(dxdc.col(0).dot(wt));
    CHECK(score_lic_ub(tar, spec, row) == doctest::Approx(expect).epsilon(1e-12));
  }

  // Degenerate protected embedding: upper bound is exactly zero.
  SyntheticSpec flat = spec;
  Rng prng2(1234567);
  flat.y_block = make_gaussian_block(prng2, 4, 2, 0.5, 1.0);
  flat.c_block = make_gaussian_block(prng2, 3, 2, 0.5, 0.0);
  SampleResult out2 = sample_dataset(flat);
  for (const RowProvenance& row : out2.provenance) {
    CHECK(score_lic_ub(tar, flat, row) == 0.0);
  }
}

TEST_CASE("idealized auxiliary regressor reproduces the generative bound") {
  // With a single-component gaussian c-block the generative Jacobian d is the
  // same for every row, and the linear auxiliary v = d / |d|^2 (an exact
  // attribute regressor) makes the gram-solve score equal |g . d| up to the
  // ridge term, i.e. score_faux == score_lic_ub to ~1e-9 relative.
  SyntheticSpec spec;
  Rng prng(55555);
  spec.y_block = make_gaussian_block(prng, 4, 1, 0.6, 1.0);
  spec.c_block = make_gaussian_block(prng, 3, 1, 0.4, 1.2);
  spec.p_c1 = spec.p_y1 = 0.5;
  spec.bias = 1.0;
  spec.n_samples = 25;
  spec.seed = 4;
  spec.param_seed = 55555;
  SampleResult out = sample_dataset(spec);

  const Matrix dxdc = true_dxdc(spec, out.provenance.front());
  const Vector v = dxdc.col(0) / dxdc.col(0).squaredNorm();
  MlpModel aux = linear_row(v);

  Rng rng(77);
  MlpModel tar = make_mlp(7, {12}, 1, rng);
  for (const RowProvenance& row : out.provenance) {
    const Vector x = row_features(spec, row);
    const double faux = score_faux(tar, aux, x);
    const double bound = score_lic_ub(tar, spec, row);
    CHECK(faux == doctest::Approx(bound).epsilon(1e-7));
  }
}

TEST_CASE("audit composes per-row scores with flags and notes") {
  Matrix x(3, 2);
  x << 0.0, 0.0, 1.0, -1.0, 0.5, 2.0;
  Vector c(3);
  c << 0, 1, 0;
  Dataset data = tiny_data(x, c);

  Vector wt(2), wa(2);
  wt << 1.0, 0.5;
  wa << 0.5, -0.25;
  MlpModel tar = linear_row(wt, 0.0, Activation::kSigmoid);
  MlpModel aux = linear_row(wa, 0.0, Activation::kSigmoid);

  AuditConfig cfg;
  cfg.tests = {FairTest::kFaux, FairTest::kFauxNg, FairTest::kFta};
  cfg.delta = 0.05;
  AuditResult result = audit(data, tar, aux, cfg);
  REQUIRE(result.records.size() == 3);
  CHECK(result.tests == cfg.tests);

  for (Index i = 0; i < 3; ++i) {
    const Vector xi = x.row(i).transpose();
    const ScoreRecord& rec = result.records[static_cast<std::size_t>(i)];
    CHECK(rec.row_index == i);
    CHECK(rec.scores.at(FairTest::kFaux) == score_faux(tar, aux, xi));
    CHECK(rec.scores.at(FairTest::kFauxNg) == score_faux_ng(tar, aux, xi));
    CHECK(rec.scores.at(FairTest::kFta) == score_fta(tar, xi, FtaNorm::kL2));
    for (FairTest t : cfg.tests) {
      CHECK(rec.flags.at(t) == (rec.scores.at(t) > cfg.delta ? 1 : 0));
    }
  }

  // Flags are monotone in delta.
  AuditConfig loose = cfg;
  loose.delta = 1e9;
  AuditResult relaxed = audit(data, tar, aux, loose);
  for (std::size_t i = 0; i < 3; ++i) {
    for (FairTest t : cfg.tests) {
      CHECK(relaxed.records[i].flags.at(t) <= result.records[i].flags.at(t));
      CHECK(relaxed.records[i].flags.at(t) == 0);
    }
  }

  // Determinism.
  AuditResult again = audit(data, tar, aux, cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(again.records[i].scores == result.records[i].scores);
  }
}

TEST_CASE("audit default test set depends on synthetic provenance") {
  Matrix x(2, 2);
  x << 0.1, 0.2, 0.3, 0.4;
  Vector c(2);
  c << 0, 1;
  Dataset data = tiny_data(x, c);
  Vector w(2);
  w << 1.0, -1.0;
  MlpModel tar = linear_row(w, 0.0, Activation::kSigmoid);
  MlpModel aux = linear_row(w, 0.0, Activation::kSigmoid);

  AuditConfig cfg;
  AuditResult result = audit(data, tar, aux, cfg);
  CHECK(result.tests.size() == 6);

  AuditConfig lic;
  lic.tests = {FairTest::kLicUb};
  CHECK_THROWS_AS(audit(data, tar, aux, lic), ValidationError);
}

TEST_CASE("audit notes degenerate auxiliary rows") {
  Matrix x(1, 2);
  x << 0.5, -0.5;
  Vector c(1);
  c << 0;
  Dataset data = tiny_data(x, c);
  Vector wt(2);
  wt << 1.0, 1.0;
  MlpModel tar = linear_row(wt, 0.0, Activation::kSigmoid);
  MlpModel aux = linear_row(Vector::Zero(2), 0.0, Activation::kSigmoid);
  AuditConfig cfg;
  cfg.tests = {FairTest::kFaux};
  AuditResult result = audit(data, tar, aux, cfg);
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].scores.at(FairTest::kFaux) == 0.0);
  REQUIRE(result.records[0].notes.size() == 1);
  CHECK(result.records[0].notes[0].find("degenerate") != std::string::npos);
}

TEST_CASE("audit validates inputs") {
  Matrix x(2, 2);
  x << 0.1, 0.2, 0.3, 0.4;
  Vector c(2);
  c << 0, 1;
  Dataset data = tiny_data(x, c);
  Vector w(2);
  w << 1.0, -1.0;
  MlpModel ok = linear_row(w, 0.0, Activation::kSigmoid);

  MlpModel wrong_dim = linear_row(Vector::Ones(3), 0.0, Activation::kSigmoid);
  AuditConfig cfg;
  cfg.tests = {FairTest::kFaux};
  CHECK_THROWS_AS(audit(data, wrong_dim, ok, cfg), ValidationError);
  CHECK_THROWS_AS(audit(data, ok, wrong_dim, cfg), ValidationError);

  AuditConfig bad_delta = cfg;
  bad_delta.delta = -1.0;
  CHECK_THROWS_AS(audit(data, ok, ok, bad_delta), ValidationError);

  AuditConfig bad_steps = cfg;
  bad_steps.ig_steps = 0;
  CHECK_THROWS_AS(audit(data, ok, ok, bad_steps), ValidationError);
}

TEST_CASE("transparency ranks features by subgroup mean gradient magnitude") {
  Matrix x(4, 3);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  Vector c(4);
  c << 0, 0, 1, 1;
  Dataset data = tiny_data(x, c);

  Vector wa(3);
  wa << 0.5, -2.0, 1.0;
  MlpModel aux = linear_row(wa);  // identity head: gradient is wa everywhere
  TransparencyReport report = transparency(aux, data);
  REQUIRE(report.features.size() == 3);
  CHECK(report.features[0].score == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(report.features[1].score == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(report.features[2].score == doctest::Approx(1.0).epsilon(1e-15));
  REQUIRE(report.ranking.size() == 3);
  CHECK(report.ranking[0] == 1);
  CHECK(report.ranking[1] == 2);
  CHECK(report.ranking[2] == 0);
  CHECK(report.features[0].group == -1);
}

TEST_CASE("transparency averages one-hot groups") {
  Matrix x(2, 2);
  x << 1, 0, 0, 1;
  Vector c(2);
  c << 0, 0;
  Dataset data = tiny_data(x, c);
  data.one_hot_groups = {{0, 1}};
  Vector wa(2);
  wa << 0.2, -0.4;
  TransparencyReport report = transparency(linear_row(wa), data);
  CHECK(report.features[0].score == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(report.features[1].score == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(report.features[0].group == 0);
  CHECK(report.features[1].group == 0);
}

TEST_CASE("transparency errors: empty subgroup, bad attribute index") {
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  Vector c(2);
  c << 1, 1;  // nobody has attribute 0
  Dataset data = tiny_data(x, c);
  Vector wa(2);
  wa << 1.0, 1.0;
  CHECK_THROWS_AS(transparency(linear_row(wa), data), ValidationError);
  Vector c_ok(2);
  c_ok << 0, 1;
  Dataset data_ok = tiny_data(x, c_ok);
  CHECK_THROWS_AS(transparency(linear_row(wa), data_ok, 3), ValidationError);
}

TEST_CASE("transparency JSON round-trip") {
  Matrix x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  Vector c(3);
  c << 0, 0, 1;
  Dataset data = tiny_data(x, c);
  data.one_hot_groups = {{1}};
  Vector wa(2);
  wa << 1.0 / 3.0, -0.7;
  TransparencyReport report = transparency(linear_row(wa), data);
  const std::string text = transparency_to_json(report);
  TransparencyReport back = transparency_from_json(text);
  REQUIRE(back.features.size() == report.features.size());
  for (std::size_t i = 0; i < report.features.size(); ++i) {
    CHECK(back.features[i].name == report.features[i].name);
    CHECK(back.features[i].score == report.features[i].score);
    CHECK(back.features[i].group == report.features[i].group);
  }
  CHECK(back.ranking == report.ranking);
  CHECK(transparency_to_json(back) == text);

  CHECK_THROWS_AS(transparency_from_json("[1,2,3]"), ValidationError);
}

TEST_CASE("test names round-trip") {
  for (FairTest t : {FairTest::kFaux, FairTest::kFauxNg, FairTest::kFauxIg,
                     FairTest::kFta, FairTest::kFtaWeighted, FairTest::kUnfairMap,
                     FairTest::kLicUb}) {
    CHECK(test_from_name(test_name(t)) == t);
  }
  CHECK_THROWS_AS(test_from_name("bogus"), ValidationError);
}
