#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "faux/dataset.hpp"
#include "faux/mlp.hpp"
#include "faux/rng.hpp"
#include "faux/types.hpp"

namespace faux {

// Joint distribution over (protected c, label y), both binary, interpolating
// between the independent product of the marginals (bias 0) and the
// maximal-dependence table with the same marginals (bias 1).
struct JointBias {
  double p_c1 = 0.5;
  double p_y1 = 0.5;
  double bias = 0.0;
  Eigen::Matrix2d table = Eigen::Matrix2d::Zero();  // table(c, y)
};

JointBias build_joint(double p_c1, double p_y1, double bias);

// KL-style dependence H(P) = sum P log(P / P_independent), 0 log 0 := 0.
double joint_dependence(const Eigen::Matrix2d& table, double p_c1, double p_y1);

enum class BlockKind { kGaussian, kSimplex };

// Closed-form class-conditional generator for one feature block. The class
// value enters only through the scalar embedding psi (psi0 for class 0, psi1
// for class 1), so every sample is differentiable in psi with an explicit
// Jacobian d sample / d psi.
//
//   gaussian: x = mean_base[j] + psi * mean_slope[j] + scale[j] .* noise(z)
//   simplex:  x = softmax(mix_mat[j] * z + psi * psi_dir[j] + offset[j])
//
// where j is the mixture component (weights shared across classes, so the
// component choice does not break differentiability in psi).
struct BlockGenerator {
  BlockKind kind = BlockKind::kGaussian;
  Index out_dim = 0;
  Index latent_dim = 0;
  double psi0 = -1.0;
  double psi1 = 1.0;
  Vector weights;  // component weights, sum 1

  // gaussian parameters (per component)
  std::vector<Vector> mean_base, mean_slope, scale;
  bool perp_noise = false;  // project noise onto the complement of mean_slope

  // simplex parameters (per component)
  std::vector<Matrix> mix_mat;
  std::vector<Vector> psi_dir, offset;

  int components() const { return static_cast<int>(weights.size()); }
  double psi(int cls) const { return cls ? psi1 : psi0; }
  double dpsi_dclass() const { return psi1 - psi0; }
};

void validate_block(const BlockGenerator& g);

// Deterministic parameter construction from an Rng stream. `noise` scales the
// stochastic part, `slope` the norm of the per-psi drift.
BlockGenerator make_gaussian_block(Rng& rng, Index out_dim, int components, double noise,
                                   double slope, bool perp_noise = false);
BlockGenerator make_simplex_block(Rng& rng, Index out_dim, Index latent_dim,
                                  int components, double noise, double slope);

// The stochastic part of one draw: mixture component and latent noise.
struct BlockDraw {
  int component = 0;
  Vector latent;
};

BlockDraw draw_block_latent(const BlockGenerator& g, Rng& rng);
Vector block_sample(const BlockGenerator& g, const BlockDraw& draw, double psi);
// d block_sample / d psi at the same draw.
Vector block_dxdpsi(const BlockGenerator& g, const BlockDraw& draw, double psi);

enum class Fusion { kConcat, kOuter };

struct SyntheticSpec {
  BlockGenerator y_block, c_block;
  Fusion fusion = Fusion::kConcat;
  double p_c1 = 0.5, p_y1 = 0.5, bias = 0.0;
  Index n_samples = 0;
  std::uint64_t seed = 0;
  std::uint64_t param_seed = 0;

  Index feature_dim() const {
    return fusion == Fusion::kConcat ? y_block.out_dim + c_block.out_dim
                                     : y_block.out_dim * c_block.out_dim;
  }
};

void validate_spec(const SyntheticSpec& spec);

// The bias=0 counterpart sharing generators and marginals; rows are drawn
// from a seed derived from spec.seed so the twin is not row-aligned.
SyntheticSpec twin_spec(const SyntheticSpec& spec);

Vector fuse_concat(const Vector& a, const Vector& b);
// vec(a (x) b), row-major; both inputs must lie on the probability simplex.
Vector fuse_outer(const Vector& a, const Vector& b);
Vector fuse(const SyntheticSpec& spec, const Vector& y_part, const Vector& c_part);

// Everything needed to reconstruct one row and its counterfactual exactly.
struct RowProvenance {
  int y = 0, c = 0;
  BlockDraw y_draw, c_draw;
};

struct SampleResult {
  Dataset dataset;
  std::vector<RowProvenance> provenance;
};

// Draws spec.n_samples rows; byte-identical for equal specs.
SampleResult sample_dataset(const SyntheticSpec& spec);

// Rebuilds the features of a provenance row (bit-exact) / its c-flipped twin.
Vector row_features(const SyntheticSpec& spec, const RowProvenance& row);
Vector counterfactual_features(const SyntheticSpec& spec, const RowProvenance& row);

struct CounterfactualPair {
  Vector x, x_flipped;
  int y = 0, c = 0;
};
CounterfactualPair counterfactual_pair(const SyntheticSpec& spec, Rng& rng);

// Individual fairness score |f(x) - f(x')|_1 over fresh counterfactual pairs.
Vector ifs_scores(const MlpModel& model, const SyntheticSpec& spec, Index n_pairs,
                  std::uint64_t seed);
// Same, but for the counterfactual twin of each given row.
Vector ifs_for_rows(const MlpModel& model, const SyntheticSpec& spec,
                    const std::vector<RowProvenance>& rows);

// label = 1 iff ifs > kappa * sigma0.
std::vector<int> fairness_labels(const Vector& ifs, double sigma0, double kappa);

// Exact generative Jacobian d features / d c (feature_dim x 1) through the
// c-block embedding and the fusion map, at the row's latent draw.
Matrix true_dxdc(const SyntheticSpec& spec, const RowProvenance& row);

// JSON round-trips for the spec (full parameters) and provenance lists.
std::string spec_to_json(const SyntheticSpec& spec);
SyntheticSpec spec_from_json(const std::string& text);
std::string provenance_to_json(const std::vector<RowProvenance>& rows);
std::vector<RowProvenance> provenance_from_json(const std::string& text);

}  // namespace faux
