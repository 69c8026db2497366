#include "faux/scores.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "faux/errors.hpp"
#include "faux/linalg.hpp"

namespace faux {
namespace {

using nlohmann::json;

bool logit_space(GradientSpace space) { return space == GradientSpace::kLogit; }

// Gradient of the audited output: the positive-class probability for
// single-output heads, output 0 otherwise.
Vector target_gradient(const MlpModel& model, const Vector& x, GradientSpace space) {
  return input_gradient(model, x, 0, logit_space(space));
}

double cosine_alignment(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na <= kEpsNorm || nb <= kEpsNorm) return 0.0;
  return std::abs(a.dot(b)) / (na * nb);
}

double max_cosine_alignment(const Vector& grad_tar, const Matrix& jac_aux) {
  double best = 0.0;
  for (Index i = 0; i < jac_aux.rows(); ++i) {
    best = std::max(best, cosine_alignment(grad_tar, jac_aux.row(i).transpose().eval()));
  }
  return best;
}

double gram_alignment(const Vector& grad_tar, const Matrix& jac_aux, bool* degenerate) {
  if (degenerate != nullptr) *degenerate = false;
  if (jac_aux.cols() != grad_tar.size()) {
    throw ValidationError("score_faux: gradient dimensions disagree");
  }
  if (jac_aux.rows() < 1) {
    throw ValidationError("score_faux: auxiliary Jacobian needs at least one row");
  }
  if (jac_aux.norm() <= kEpsNorm) {
    if (degenerate != nullptr) *degenerate = true;
    return 0.0;
  }
  if (jac_aux.rows() == 1) {
    const Vector g_aux = jac_aux.row(0).transpose();
    return std::abs(grad_tar.dot(g_aux)) / (g_aux.squaredNorm() + kEpsRidge);
  }
  return score_faux_from_grads(grad_tar, jac_aux);
}

}  // namespace

std::string test_name(FairTest test) {
  switch (test) {
    case FairTest::kFaux: return "faux";
    case FairTest::kFauxNg: return "faux_ng";
    case FairTest::kFauxIg: return "faux_ig";
    case FairTest::kFta: return "fta";
    case FairTest::kFtaWeighted: return "fta_weighted";
    case FairTest::kUnfairMap: return "unfair_map";
    case FairTest::kLicUb: return "lic_ub";
  }
  throw ValidationError("unknown fairness test");
}

FairTest test_from_name(const std::string& name) {
  for (FairTest test : {FairTest::kFaux, FairTest::kFauxNg, FairTest::kFauxIg,
                        FairTest::kFta, FairTest::kFtaWeighted, FairTest::kUnfairMap,
                        FairTest::kLicUb}) {
    if (test_name(test) == name) return test;
  }
  throw ValidationError("unknown fairness test '" + name + "'");
}

double score_faux_from_grads(const Vector& grad_tar, const Matrix& jac_aux) {
  const Index k = jac_aux.rows();
  Matrix gram = jac_aux * jac_aux.transpose();
  gram.diagonal().array() += kEpsRidge;
  const Matrix rhs = jac_aux * grad_tar;
  const Matrix w = solve_spd(gram, rhs);
  double best = 0.0;
  for (Index i = 0; i < k; ++i) best = std::max(best, std::abs(w(i, 0)));
  return best;
}

double score_faux(const MlpModel& target, const MlpModel& aux, const Vector& x,
                  GradientSpace space, bool* degenerate) {
  const Vector grad_tar = target_gradient(target, x, space);
  const Matrix jac_aux = input_jacobian(aux, x, logit_space(space));
  return gram_alignment(grad_tar, jac_aux, degenerate);
}

double score_faux_ng(const MlpModel& target, const MlpModel& aux, const Vector& x,
                     GradientSpace space) {
  const Vector grad_tar = target_gradient(target, x, space);
  const Matrix jac_aux = input_jacobian(aux, x, logit_space(space));
  return max_cosine_alignment(grad_tar, jac_aux);
}

double score_faux_ig(const MlpModel& target, const MlpModel& aux, const Vector& x,
                     const Vector& baseline, Index steps, IgForm form,
                     GradientSpace space, bool* degenerate) {
  if (degenerate != nullptr) *degenerate = false;
  const bool logit = logit_space(space);
  const Vector ig_tar = integrated_gradient(target, x, baseline, 0, steps, logit);
  Matrix ig_aux(aux.output_dim(), x.size());
  for (Index i = 0; i < aux.output_dim(); ++i) {
    ig_aux.row(i) = integrated_gradient(aux, x, baseline, i, steps, logit).transpose();
  }
  if (form == IgForm::kNormalized) {
    return max_cosine_alignment(ig_tar, ig_aux);
  }
  return gram_alignment(ig_tar, ig_aux, degenerate);
}

double score_fta(const MlpModel& target, const Vector& x, FtaNorm p,
                 GradientSpace space) {
  const Vector g = target_gradient(target, x, space);
  switch (p) {
    case FtaNorm::kL1: return g.lpNorm<1>();
    case FtaNorm::kL2: return g.norm();
    case FtaNorm::kLinf: return g.lpNorm<Eigen::Infinity>();
  }
  throw ValidationError("unknown norm order");
}

double score_fta_weighted(const MlpModel& target, const LinearModel& linear,
                          const Vector& x, GradientSpace space) {
  const double wn = linear.weights.norm();
  if (wn <= kEpsNorm) {
    throw ValidationError("score_fta_weighted: degenerate linear model");
  }
  const Vector g = target_gradient(target, x, space);
  if (g.size() != linear.weights.size()) {
    throw ValidationError("score_fta_weighted: dimension mismatch");
  }
  return std::abs(g.dot(linear.weights)) / wn;
}

double score_unfair_map(const MlpModel& target, const LinearModel& linear,
                        const Vector& x, const UnfairMapConfig& config,
                        const Vector& domain_lo, const Vector& domain_hi) {
  if (config.steps < 0) {
    throw ValidationError("score_unfair_map: steps must be >= 0");
  }
  const double wn = linear.weights.norm();
  if (wn <= kEpsNorm) {
    throw ValidationError("score_unfair_map: degenerate linear model");
  }
  if (domain_lo.size() != x.size() || domain_hi.size() != x.size()) {
    throw ValidationError("score_unfair_map: domain bounds must match input dim");
  }
  const Vector unit = linear.weights / wn;
  const double f0 = forward(target, x)(0);
  Vector point = x;
  for (int t = 0; t < config.steps; ++t) {
    const Vector g = input_gradient(target, point, 0, false);
    const double along = g.dot(unit);
    const double gnorm2 = g.squaredNorm();
    double scale = 0.0;
    if (gnorm2 > kEpsNorm * kEpsNorm) {
      const double cos2 = (along * along) / gnorm2;
      scale = along / (1.0 + config.subspace_reg * (1.0 - cos2));
    }
    point += config.step_size * scale * unit;
    point = point.cwiseMax(domain_lo).cwiseMin(domain_hi);
    if (!point.allFinite()) {
      throw DivergenceError("unfair-map attack diverged at step " + std::to_string(t));
    }
  }
  return std::abs(forward(target, point)(0) - f0);
}

double score_lic_ub(const MlpModel& target, const SyntheticSpec& spec,
                    const RowProvenance& row, GradientSpace space) {
  const Vector x = row_features(spec, row);
  const Vector g = target_gradient(target, x, space);
  const Matrix dxdc = true_dxdc(spec, row);
  double best = 0.0;
  for (Index j = 0; j < dxdc.cols(); ++j) {
    best = std::max(best, std::abs(dxdc.col(j).dot(g)));
  }
  return best;
}

namespace {

std::vector<FairTest> resolve_tests(const AuditConfig& config, bool have_synth) {
  if (!config.tests.empty()) return config.tests;
  std::vector<FairTest> tests = {FairTest::kFaux,        FairTest::kFauxNg,
                                 FairTest::kFauxIg,      FairTest::kFta,
                                 FairTest::kFtaWeighted, FairTest::kUnfairMap};
  if (have_synth) tests.push_back(FairTest::kLicUb);
  return tests;
}

bool contains(const std::vector<FairTest>& tests, FairTest t) {
  return std::find(tests.begin(), tests.end(), t) != tests.end();
}

}  // namespace

AuditResult audit(const Dataset& data, const MlpModel& target, const MlpModel& aux,
                  const AuditConfig& config, const SyntheticSpec* spec,
                  const std::vector<RowProvenance>* provenance) {
  validate_dataset(data);
  validate_model(target);
  validate_model(aux);
  if (target.input_dim != data.dim() || aux.input_dim != data.dim()) {
    throw ValidationError("audit: model input dims must match the dataset");
  }
  if (aux.output_dim() != data.k()) {
    throw ValidationError("audit: auxiliary output dim must match protected attrs");
  }
  if (!(config.delta >= 0.0)) {
    throw ValidationError("audit: delta must be >= 0");
  }
  if (config.ig_steps < 1) {
    throw ValidationError("audit: ig_steps must be >= 1");
  }

  const bool have_synth =
      spec != nullptr && provenance != nullptr &&
      static_cast<Index>(provenance->size()) == data.n();
  AuditResult result;
  result.tests = resolve_tests(config, have_synth);
  result.delta = config.delta;
  if (contains(result.tests, FairTest::kLicUb) && !have_synth) {
    throw ValidationError("audit: lic_ub requires synthetic spec and provenance");
  }

  const Index n = data.n();
  const Index d = data.dim();
  if (config.ig_baseline) {
    if (config.ig_baseline->size() != d) {
      throw ValidationError("audit: ig_baseline dimension mismatch");
    }
    result.ig_baseline = *config.ig_baseline;
  } else {
    result.ig_baseline = n > 0 ? data.features.colwise().mean().transpose().eval()
                               : Vector::Zero(d).eval();
  }
  if (config.domain_lo && config.domain_hi) {
    if (config.domain_lo->size() != d || config.domain_hi->size() != d) {
      throw ValidationError("audit: domain bounds dimension mismatch");
    }
    result.domain_lo = *config.domain_lo;
    result.domain_hi = *config.domain_hi;
  } else {
    result.domain_lo = n > 0 ? data.features.colwise().minCoeff().transpose().eval()
                             : Vector::Zero(d).eval();
    result.domain_hi = n > 0 ? data.features.colwise().maxCoeff().transpose().eval()
                             : Vector::Zero(d).eval();
  }

  const bool needs_linear = contains(result.tests, FairTest::kFtaWeighted) ||
                            contains(result.tests, FairTest::kUnfairMap);
  if (needs_linear) {
    if (config.linear_model) {
      result.linear_model = *config.linear_model;
    } else {
      if (n == 0) {
        throw ValidationError("audit: cannot fit a linear model on an empty dataset");
      }
      result.linear_model = fit_logistic(data.features, data.protected_attrs.col(0));
    }
  }

  result.records.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Vector x = data.features.row(i).transpose();
    ScoreRecord record;
    record.row_index = i;
    for (FairTest test : result.tests) {
      double score = 0.0;
      bool degenerate = false;
      switch (test) {
        case FairTest::kFaux:
          score = score_faux(target, aux, x, config.gradient_space, &degenerate);
          break;
        case FairTest::kFauxNg:
          score = score_faux_ng(target, aux, x, config.gradient_space);
          break;
        case FairTest::kFauxIg:
          score = score_faux_ig(target, aux, x, result.ig_baseline, config.ig_steps,
                                config.ig_form, config.gradient_space, &degenerate);
          break;
        case FairTest::kFta:
          score = score_fta(target, x, FtaNorm::kL2, config.gradient_space);
          break;
        case FairTest::kFtaWeighted:
          score = score_fta_weighted(target, *result.linear_model, x,
                                     config.gradient_space);
          break;
        case FairTest::kUnfairMap:
          score = score_unfair_map(target, *result.linear_model, x, config.unfair_map,
                                   result.domain_lo, result.domain_hi);
          break;
        case FairTest::kLicUb:
          score = score_lic_ub(target, *spec, (*provenance)[static_cast<std::size_t>(i)],
                               config.gradient_space);
          break;
      }
      if (!std::isfinite(score) || score < 0.0) {
        throw DivergenceError("audit: non-finite score for test " + test_name(test) +
                              " at row " + std::to_string(i));
      }
      record.scores[test] = score;
      record.flags[test] = score > config.delta ? 1 : 0;
      if (degenerate) {
        record.notes.push_back(test_name(test) + ": degenerate auxiliary gradient");
      }
    }
    result.records.push_back(std::move(record));
  }
  return result;
}

TransparencyReport transparency(const MlpModel& aux, const Dataset& data,
                                Index attr_index, GradientSpace space) {
  validate_dataset(data);
  validate_model(aux);
  if (aux.input_dim != data.dim()) {
    throw ValidationError("transparency: model input dim must match the dataset");
  }
  if (attr_index < 0 || attr_index >= data.k()) {
    throw ValidationError("transparency: attribute index out of range");
  }
  const Index out_index = aux.output_dim() == 1 ? 0 : attr_index;
  if (out_index >= aux.output_dim()) {
    throw ValidationError("transparency: attribute index exceeds model outputs");
  }

  Vector mean_grad = Vector::Zero(data.dim());
  Index count = 0;
  for (Index i = 0; i < data.n(); ++i) {
    if (data.protected_attrs(i, attr_index) == 0.0) {
      const Vector x = data.features.row(i).transpose();
      mean_grad += input_gradient(aux, x, out_index, logit_space(space));
      ++count;
    }
  }
  if (count == 0) {
    throw ValidationError("transparency: subgroup with attribute == 0 is empty");
  }
  mean_grad /= static_cast<double>(count);

  std::vector<double> scores(static_cast<std::size_t>(data.dim()));
  std::vector<int> groups(static_cast<std::size_t>(data.dim()), -1);
  for (Index j = 0; j < data.dim(); ++j) {
    scores[static_cast<std::size_t>(j)] = std::abs(mean_grad(j));
  }
  for (std::size_t g = 0; g < data.one_hot_groups.size(); ++g) {
    const auto& members = data.one_hot_groups[g];
    if (members.empty()) continue;
    double sum = 0.0;
    for (int j : members) {
      if (j < 0 || j >= data.dim()) {
        throw ValidationError("transparency: one-hot group index out of range");
      }
      sum += scores[static_cast<std::size_t>(j)];
    }
    const double mean = sum / static_cast<double>(members.size());
    for (int j : members) {
      scores[static_cast<std::size_t>(j)] = mean;
      groups[static_cast<std::size_t>(j)] = static_cast<int>(g);
    }
  }

  TransparencyReport report;
  for (Index j = 0; j < data.dim(); ++j) {
    TransparencyEntry entry;
    entry.name = data.column_names[static_cast<std::size_t>(j)];
    entry.score = scores[static_cast<std::size_t>(j)];
    entry.group = groups[static_cast<std::size_t>(j)];
    report.features.push_back(std::move(entry));
  }
  report.ranking.resize(static_cast<std::size_t>(data.dim()));
  std::iota(report.ranking.begin(), report.ranking.end(), Index{0});
  std::stable_sort(report.ranking.begin(), report.ranking.end(),
                   [&](Index a, Index b) {
                     return scores[static_cast<std::size_t>(a)] >
                            scores[static_cast<std::size_t>(b)];
                   });
  return report;
}

std::string transparency_to_json(const TransparencyReport& report) {
  json features = json::array();
  for (const auto& entry : report.features) {
    json item;
    item["name"] = entry.name;
    item["score"] = entry.score;
    if (entry.group >= 0) {
      item["group"] = entry.group;
    } else {
      item["group"] = nullptr;
    }
    features.push_back(std::move(item));
  }
  json ranking = json::array();
  for (Index idx : report.ranking) {
    ranking.push_back(report.features[static_cast<std::size_t>(idx)].name);
  }
  json doc;
  doc["features"] = std::move(features);
  doc["ranking"] = std::move(ranking);
  return doc.dump(2) + "\n";
}

TransparencyReport transparency_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("transparency JSON parse error: ") + e.what());
  }
  TransparencyReport report;
  try {
    std::map<std::string, Index> index_of;
    for (const auto& item : doc.at("features")) {
      TransparencyEntry entry;
      entry.name = item.at("name").get<std::string>();
      entry.score = item.at("score").get<double>();
      entry.group = item.at("group").is_null() ? -1 : item.at("group").get<int>();
      index_of[entry.name] = static_cast<Index>(report.features.size());
      report.features.push_back(std::move(entry));
    }
    for (const auto& name : doc.at("ranking")) {
      const auto it = index_of.find(name.get<std::string>());
      if (it == index_of.end()) {
        throw ValidationError("transparency JSON: ranking names unknown feature");
      }
      report.ranking.push_back(it->second);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("transparency JSON is malformed: ") + e.what());
  }
  if (report.ranking.size() != report.features.size()) {
    throw ValidationError("transparency JSON: ranking size mismatch");
  }
  return report;
}

}  // namespace faux
