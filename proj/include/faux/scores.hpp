#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faux/dataset.hpp"
#include "faux/mlp.hpp"
#include "faux/synth.hpp"
#include "faux/train.hpp"
#include "faux/types.hpp"

namespace faux {

// Individual-fairness tests. `kLicUb` needs synthetic provenance.
enum class FairTest {
  kFaux,
  kFauxNg,
  kFauxIg,
  kFta,
  kFtaWeighted,
  kUnfairMap,
  kLicUb,
};

std::string test_name(FairTest test);
FairTest test_from_name(const std::string& name);

// Space in which model gradients are taken for the alignment tests.
enum class GradientSpace { kProbability, kLogit };

// How fAux+IG combines the integrated-gradient vectors.
enum class IgForm { kNormalized, kPseudoinverse };

enum class FtaNorm { kL1, kL2, kLinf };

struct UnfairMapConfig {
  int steps = 100;
  double step_size = 0.01;
  double subspace_reg = 100.0;
};

struct AuditConfig {
  double delta = 0.05;
  std::vector<FairTest> tests;  // empty = every applicable test
  GradientSpace gradient_space = GradientSpace::kProbability;
  Index ig_steps = 64;
  std::optional<Vector> ig_baseline;  // default: feature mean
  IgForm ig_form = IgForm::kNormalized;
  UnfairMapConfig unfair_map;
  std::optional<LinearModel> linear_model;  // default: logistic fit on attribute 0
  std::optional<Vector> domain_lo;          // default: observed per-feature min
  std::optional<Vector> domain_hi;          // default: observed per-feature max
};

struct ScoreRecord {
  Index row_index = 0;
  std::map<FairTest, double> scores;
  std::map<FairTest, int> flags;
  std::vector<std::string> notes;
};

struct AuditResult {
  std::vector<FairTest> tests;
  double delta = 0.0;
  std::vector<ScoreRecord> records;
  std::optional<LinearModel> linear_model;  // present when a linear test ran
  Vector ig_baseline;
  Vector domain_lo, domain_hi;
};

struct TransparencyEntry {
  std::string name;
  double score = 0.0;
  int group = -1;  // index into one_hot_groups, -1 when ungrouped
};

struct TransparencyReport {
  std::vector<TransparencyEntry> features;
  std::vector<Index> ranking;  // feature indices, descending score
};

// Gram-system path used for any auxiliary Jacobian; the public scorers
// shortcut k=1 to the closed form.
double score_faux_from_grads(const Vector& grad_tar, const Matrix& jac_aux);

double score_faux(const MlpModel& target, const MlpModel& aux, const Vector& x,
                  GradientSpace space = GradientSpace::kProbability,
                  bool* degenerate = nullptr);

double score_faux_ng(const MlpModel& target, const MlpModel& aux, const Vector& x,
                     GradientSpace space = GradientSpace::kProbability);

double score_faux_ig(const MlpModel& target, const MlpModel& aux, const Vector& x,
                     const Vector& baseline, Index steps,
                     IgForm form = IgForm::kNormalized,
                     GradientSpace space = GradientSpace::kProbability,
                     bool* degenerate = nullptr);

double score_fta(const MlpModel& target, const Vector& x, FtaNorm p,
                 GradientSpace space = GradientSpace::kProbability);

double score_fta_weighted(const MlpModel& target, const LinearModel& linear,
                          const Vector& x,
                          GradientSpace space = GradientSpace::kProbability);

// Sensitive-subspace gradient-flow attack; probability-space output gap.
double score_unfair_map(const MlpModel& target, const LinearModel& linear,
                        const Vector& x, const UnfairMapConfig& config,
                        const Vector& domain_lo, const Vector& domain_hi);

double score_lic_ub(const MlpModel& target, const SyntheticSpec& spec,
                    const RowProvenance& row,
                    GradientSpace space = GradientSpace::kProbability);

AuditResult audit(const Dataset& data, const MlpModel& target, const MlpModel& aux,
                  const AuditConfig& config, const SyntheticSpec* spec = nullptr,
                  const std::vector<RowProvenance>* provenance = nullptr);

// Mean-gradient feature attribution over the subgroup with attribute == 0.
TransparencyReport transparency(const MlpModel& aux, const Dataset& data,
                                Index attr_index = 0,
                                GradientSpace space = GradientSpace::kProbability);

std::string transparency_to_json(const TransparencyReport& report);
TransparencyReport transparency_from_json(const std::string& text);

}  // namespace faux
