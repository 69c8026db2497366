#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "faux/dataset.hpp"
#include "faux/scores.hpp"
#include "faux/types.hpp"

namespace faux {

struct PrCurve {
  Vector thresholds;
  Vector precision;
  Vector recall;
  double average_precision = 0.0;
};

// Non-interpolated AP over the descending-score ranking (ties by index).
double average_precision(const Vector& scores, const std::vector<int>& labels);

PrCurve pr_curve(const Vector& scores, const std::vector<int>& labels);

// Linear-gain NDCG of the predicted ordering against the relevance vector.
double ndcg(const Vector& predicted_scores, const Vector& true_relevance);

double digamma(double x);

inline constexpr std::uint64_t kMiJitterSeed = 20140603;

// kNN mutual information between a continuous feature and a discrete class.
double mi_discrete_continuous(const Vector& feature, const std::vector<int>& classes,
                              int k = 3, std::uint64_t jitter_seed = kMiJitterSeed);

// NDCG of a transparency ranking against per-feature MI ground truth.
double transparency_ndcg(const TransparencyReport& report, const Dataset& data,
                         Index attr_index = 0, int k = 3,
                         std::uint64_t jitter_seed = kMiJitterSeed);

struct DistributionComparison {
  double fair_median = 0.0;
  double fair_iqr = 0.0;
  double unfair_median = 0.0;
  double unfair_iqr = 0.0;
  double prob_unfair_greater = 0.0;  // cross-pair P(unfair > fair), ties count 1/2
};

DistributionComparison compare_models(const Vector& fair_scores,
                                      const Vector& unfair_scores);

std::string pr_curve_to_csv(const PrCurve& curve);
std::string pr_curve_to_svg(const PrCurve& curve, const std::string& title);

}  // namespace faux
