#include "faux/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "faux/errors.hpp"
#include "faux/io.hpp"
#include "faux/rng.hpp"

namespace faux {
namespace {

// Descending score, ascending index on ties.
std::vector<Index> ranked_order(const Vector& scores) {
  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return scores(a) > scores(b);
  });
  return order;
}

void check_binary_labels(const Vector& scores, const std::vector<int>& labels) {
  if (scores.size() < 1) {
    throw ValidationError("ranking metric: need at least one element");
  }
  if (static_cast<std::size_t>(scores.size()) != labels.size()) {
    throw ValidationError("ranking metric: scores and labels length mismatch");
  }
  if (!scores.allFinite()) {
    throw ValidationError("ranking metric: scores must be finite");
  }
  for (int label : labels) {
    if (label != 0 && label != 1) {
      throw ValidationError("ranking metric: labels must be 0/1");
    }
  }
}

int count_positives(const std::vector<int>& labels) {
  int positives = 0;
  for (int label : labels) positives += label;
  return positives;
}

}  // namespace

double average_precision(const Vector& scores, const std::vector<int>& labels) {
  check_binary_labels(scores, labels);
  const int positives = count_positives(labels);
  if (positives == 0) {
    throw UndefinedMetricError("average_precision: no positive labels");
  }
  const std::vector<Index> order = ranked_order(scores);
  double ap = 0.0;
  int tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[static_cast<std::size_t>(order[rank])] == 1) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(positives);
}

PrCurve pr_curve(const Vector& scores, const std::vector<int>& labels) {
  check_binary_labels(scores, labels);
  const int positives = count_positives(labels);
  if (positives == 0) {
    throw UndefinedMetricError("pr_curve: no positive labels");
  }
  const std::vector<Index> order = ranked_order(scores);
  std::vector<double> thr, prec, rec;
  int tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    tp += labels[static_cast<std::size_t>(order[rank])];
    const double score = scores(order[rank]);
    // Emit one point per distinct threshold: close the group when the next
    // ranked score differs.
    if (rank + 1 == order.size() || scores(order[rank + 1]) != score) {
      thr.push_back(score);
      prec.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
      rec.push_back(static_cast<double>(tp) / static_cast<double>(positives));
    }
  }
  PrCurve curve;
  curve.thresholds = Eigen::Map<const Vector>(thr.data(), static_cast<Index>(thr.size()));
  curve.precision = Eigen::Map<const Vector>(prec.data(), static_cast<Index>(prec.size()));
  curve.recall = Eigen::Map<const Vector>(rec.data(), static_cast<Index>(rec.size()));
  curve.average_precision = average_precision(scores, labels);
  return curve;
}

double ndcg(const Vector& predicted_scores, const Vector& true_relevance) {
  if (predicted_scores.size() < 1) {
    throw ValidationError("ndcg: need at least one element");
  }
  if (predicted_scores.size() != true_relevance.size()) {
    throw ValidationError("ndcg: length mismatch");
  }
  if (!predicted_scores.allFinite() || !true_relevance.allFinite()) {
    throw ValidationError("ndcg: inputs must be finite");
  }
  if ((true_relevance.array() < 0.0).any()) {
    throw ValidationError("ndcg: relevances must be >= 0");
  }
  if (true_relevance.maxCoeff() == 0.0) {
    throw UndefinedMetricError("ndcg: all-zero relevance");
  }
  const std::vector<Index> order = ranked_order(predicted_scores);
  std::vector<Index> ideal = ranked_order(true_relevance);
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const double discount = std::log2(static_cast<double>(rank) + 2.0);
    dcg += true_relevance(order[rank]) / discount;
    idcg += true_relevance(ideal[rank]) / discount;
  }
  return dcg / idcg;
}

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw ValidationError("digamma: argument must be positive and finite");
  }
  double result = 0.0;
  while (x < 8.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Asymptotic series: ln x - 1/(2x) - sum of Bernoulli terms. Truncated
  // after the x^-12 term; for x >= 8 the remainder is below 2e-14.
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                            inv2 * (1.0 / 252.0 -
                                    inv2 * (1.0 / 240.0 -
                                            inv2 * (1.0 / 132.0 -
                                                    inv2 * (691.0 / 32760.0))))));
  return result;
}

double mi_discrete_continuous(const Vector& feature, const std::vector<int>& classes,
                              int k, std::uint64_t jitter_seed) {
  const Index n = feature.size();
  if (static_cast<std::size_t>(n) != classes.size()) {
    throw ValidationError("mi: feature and class length mismatch");
  }
  if (k < 1) {
    throw ValidationError("mi: k must be >= 1");
  }
  if (!feature.allFinite()) {
    throw ValidationError("mi: feature must be finite");
  }

  // Deterministic tie-breaking jitter before the neighbor search.
  Rng rng(jitter_seed);
  std::vector<double> jittered(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    jittered[static_cast<std::size_t>(i)] = feature(i) + rng.uniform(0.0, 1e-10);
  }

  std::map<int, std::vector<Index>> by_class;
  for (Index i = 0; i < n; ++i) by_class[classes[static_cast<std::size_t>(i)]].push_back(i);
  for (const auto& [cls, members] : by_class) {
    if (static_cast<int>(members.size()) < k + 1) {
      throw ValidationError("mi: class " + std::to_string(cls) + " has fewer than k+1 members");
    }
  }

  std::vector<double> all_sorted = jittered;
  std::sort(all_sorted.begin(), all_sorted.end());

  // Per-class sorted values and each point's rank inside its class.
  std::map<int, std::vector<double>> class_sorted;
  std::vector<std::size_t> rank_in_class(static_cast<std::size_t>(n));
  for (auto& [cls, members] : by_class) {
    std::sort(members.begin(), members.end(), [&](Index a, Index b) {
      return jittered[static_cast<std::size_t>(a)] < jittered[static_cast<std::size_t>(b)];
    });
    auto& values = class_sorted[cls];
    values.reserve(members.size());
    for (std::size_t pos = 0; pos < members.size(); ++pos) {
      values.push_back(jittered[static_cast<std::size_t>(members[pos])]);
      rank_in_class[static_cast<std::size_t>(members[pos])] = pos;
    }
  }

  double sum_psi_nc = 0.0;
  double sum_psi_m = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int cls = classes[static_cast<std::size_t>(i)];
    const auto& values = class_sorted[cls];
    const double x = jittered[static_cast<std::size_t>(i)];
    const std::size_t pos = rank_in_class[static_cast<std::size_t>(i)];

    // Distance to the k-th nearest same-class neighbor (self excluded).
    std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(pos) - 1;
    std::size_t hi = pos + 1;
    double dist = 0.0;
    for (int taken = 0; taken < k; ++taken) {
      const double dlo = lo >= 0 ? x - values[static_cast<std::size_t>(lo)]
                                 : std::numeric_limits<double>::infinity();
      const double dhi = hi < values.size() ? values[hi] - x
                                            : std::numeric_limits<double>::infinity();
      if (dlo <= dhi) {
        dist = dlo;
        --lo;
      } else {
        dist = dhi;
        ++hi;
      }
    }

    // Count all points strictly inside (x - dist, x + dist); self included.
    const auto left = std::upper_bound(all_sorted.begin(), all_sorted.end(), x - dist);
    const auto right = std::lower_bound(all_sorted.begin(), all_sorted.end(), x + dist);
    const auto m = std::max<std::ptrdiff_t>(right - left, 1);
    sum_psi_nc += digamma(static_cast<double>(values.size()));
    sum_psi_m += digamma(static_cast<double>(m));
  }

  const double nn = static_cast<double>(n);
  const double mi = digamma(nn) - sum_psi_nc / nn + digamma(static_cast<double>(k)) -
                    sum_psi_m / nn;
  return std::max(0.0, mi);
}

double transparency_ndcg(const TransparencyReport& report, const Dataset& data,
                         Index attr_index, int k, std::uint64_t jitter_seed) {
  validate_dataset(data);
  if (attr_index < 0 || attr_index >= data.k()) {
    throw ValidationError("transparency_ndcg: attribute index out of range");
  }
  if (static_cast<Index>(report.features.size()) != data.dim()) {
    throw ValidationError("transparency_ndcg: report does not match the dataset");
  }
  std::vector<int> classes(static_cast<std::size_t>(data.n()));
  for (Index i = 0; i < data.n(); ++i) {
    classes[static_cast<std::size_t>(i)] =
        data.protected_attrs(i, attr_index) == 0.0 ? 0 : 1;
  }
  Vector relevance(data.dim());
  for (Index j = 0; j < data.dim(); ++j) {
    relevance(j) = mi_discrete_continuous(data.features.col(j), classes, k, jitter_seed);
  }
  // Same one-hot aggregation rule as the report itself.
  for (const auto& members : data.one_hot_groups) {
    if (members.empty()) continue;
    double sum = 0.0;
    for (int j : members) sum += relevance(j);
    const double mean = sum / static_cast<double>(members.size());
    for (int j : members) relevance(j) = mean;
  }
  Vector predicted(data.dim());
  for (Index j = 0; j < data.dim(); ++j) {
    predicted(j) = report.features[static_cast<std::size_t>(j)].score;
  }
  return ndcg(predicted, relevance);
}

namespace {

// Type-7 quantile (linear interpolation) on a pre-sorted vector.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

DistributionComparison compare_models(const Vector& fair_scores,
                                      const Vector& unfair_scores) {
  if (fair_scores.size() < 1 || unfair_scores.size() < 1) {
    throw ValidationError("compare_models: both score sets must be nonempty");
  }
  std::vector<double> fair(fair_scores.data(), fair_scores.data() + fair_scores.size());
  std::vector<double> unfair(unfair_scores.data(),
                             unfair_scores.data() + unfair_scores.size());
  std::sort(fair.begin(), fair.end());
  std::sort(unfair.begin(), unfair.end());

  DistributionComparison summary;
  summary.fair_median = quantile_sorted(fair, 0.5);
  summary.fair_iqr = quantile_sorted(fair, 0.75) - quantile_sorted(fair, 0.25);
  summary.unfair_median = quantile_sorted(unfair, 0.5);
  summary.unfair_iqr = quantile_sorted(unfair, 0.75) - quantile_sorted(unfair, 0.25);

  // Rank-sum style cross-pair probability with half credit for ties; the two
  // sorted arrays make this a linear merge.
  double wins = 0.0;
  for (double u : unfair) {
    const auto below = std::lower_bound(fair.begin(), fair.end(), u) - fair.begin();
    const auto below_or_equal = std::upper_bound(fair.begin(), fair.end(), u) - fair.begin();
    wins += static_cast<double>(below) + 0.5 * static_cast<double>(below_or_equal - below);
  }
  summary.prob_unfair_greater =
      wins / (static_cast<double>(fair.size()) * static_cast<double>(unfair.size()));
  return summary;
}

std::string pr_curve_to_csv(const PrCurve& curve) {
  std::string out = "recall,precision\n";
  for (Index i = 0; i < curve.recall.size(); ++i) {
    out += double_to_string(curve.recall(i));
    out += ',';
    out += double_to_string(curve.precision(i));
    out += '\n';
  }
  return out;
}

namespace {

std::string svg_num(double v) {
  // Round to 0.01 px so coordinates stay short and deterministic.
  return double_to_string(std::round(v * 100.0) / 100.0);
}

}  // namespace

std::string pr_curve_to_svg(const PrCurve& curve, const std::string& title) {
  constexpr double x0 = 60.0, x1 = 620.0, y0 = 430.0, y1 = 40.0;
  const auto map_x = [&](double recall) { return x0 + recall * (x1 - x0); };
  const auto map_y = [&](double precision) { return y0 + precision * (y1 - y0); };

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 640 480\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";
  svg += "<text x=\"340\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">" + title + "</text>\n";
  svg += "<rect x=\"60\" y=\"40\" width=\"560\" height=\"390\" fill=\"none\" "
         "stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double f = static_cast<double>(tick) / 4.0;
    const std::string label = double_to_string(f);
    const std::string tx = svg_num(map_x(f));
    const std::string ty = svg_num(map_y(f));
    svg += "<line x1=\"" + tx + "\" y1=\"430\" x2=\"" + tx +
           "\" y2=\"436\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + tx + "\" y=\"452\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"12\">" + label + "</text>\n";
    svg += "<line x1=\"54\" y1=\"" + ty + "\" x2=\"60\" y2=\"" + ty +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"48\" y=\"" + ty + "\" text-anchor=\"end\" dominant-baseline=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"12\">" + label + "</text>\n";
  }
  svg += "<text x=\"340\" y=\"474\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">recall</text>\n";
  svg += "<text x=\"16\" y=\"235\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\" transform=\"rotate(-90 16 235)\">precision</text>\n";
  std::string points;
  for (Index i = 0; i < curve.recall.size(); ++i) {
    if (i > 0) points += ' ';
    points += svg_num(map_x(curve.recall(i)));
    points += ',';
    points += svg_num(map_y(curve.precision(i)));
  }
  svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" +
         points + "\"/>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace faux
