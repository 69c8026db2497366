#include "faux/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <json.hpp>

#include "faux/errors.hpp"

namespace faux {
namespace {

using nlohmann::json;

constexpr std::uint64_t kTwinTag = 0x7717a11ce5eed5ull;

void check_unit_interval(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValidationError(std::string(name) + " must lie in [0, 1]");
  }
}

Eigen::Matrix2d independent_table(double p_c1, double p_y1) {
  Eigen::Matrix2d t;
  t(0, 0) = (1.0 - p_c1) * (1.0 - p_y1);
  t(0, 1) = (1.0 - p_c1) * p_y1;
  t(1, 0) = p_c1 * (1.0 - p_y1);
  t(1, 1) = p_c1 * p_y1;
  return t;
}

// Feasible table with P(1,1) = p and the given marginals.
Eigen::Matrix2d table_from_free_cell(double p_c1, double p_y1, double p) {
  Eigen::Matrix2d t;
  t(1, 1) = p;
  t(1, 0) = p_c1 - p;
  t(0, 1) = p_y1 - p;
  t(0, 0) = 1.0 - p_c1 - p_y1 + p;
  return t;
}

}  // namespace

double joint_dependence(const Eigen::Matrix2d& table, double p_c1, double p_y1) {
  const Eigen::Matrix2d base = independent_table(p_c1, p_y1);
  double h = 0.0;
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < 2; ++y) {
      const double p = table(c, y);
      if (p > 0.0) {
        h += p * std::log(p / base(c, y));
      }
    }
  }
  return h;
}

JointBias build_joint(double p_c1, double p_y1, double bias) {
  if (!(p_c1 > 0.0 && p_c1 < 1.0) || !(p_y1 > 0.0 && p_y1 < 1.0)) {
    throw ValidationError("build_joint: marginals must lie strictly inside (0, 1)");
  }
  check_unit_interval(bias, "bias");

  const double p_lo = std::max(0.0, p_c1 + p_y1 - 1.0);
  const double p_hi = std::min(p_c1, p_y1);
  const auto h_at = [&](double p) {
    return joint_dependence(table_from_free_cell(p_c1, p_y1, p), p_c1, p_y1);
  };

  // Maximal-dependence free cell: 1001-point grid, then two golden-section
  // refinements around the grid argmax. Ties break toward larger P(1,1)
  // (positive correlation), hence the >= on an ascending sweep.
  double best_p = p_lo;
  double best_h = h_at(p_lo);
  for (int i = 1; i <= 1000; ++i) {
    const double p =
        i == 1000 ? p_hi : p_lo + (p_hi - p_lo) * (static_cast<double>(i) / 1000.0);
    const double h = h_at(p);
    if (h >= best_h) {
      best_h = h;
      best_p = p;
    }
  }
  {
    const double width = (p_hi - p_lo) / 1000.0;
    double a = std::max(p_lo, best_p - width);
    double b = std::min(p_hi, best_p + width);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a);
    double x2 = a + gr * (b - a);
    double h1 = h_at(x1), h2 = h_at(x2);
    for (int iter = 0; iter < 2; ++iter) {
      if (h1 < h2) {
        a = x1;
        x1 = x2;
        h1 = h2;
        x2 = a + gr * (b - a);
        h2 = h_at(x2);
      } else {
        b = x2;
        x2 = x1;
        h2 = h1;
        x1 = b - gr * (b - a);
        h1 = h_at(x1);
      }
    }
    for (const auto& [p, h] : {std::pair{x1, h1}, std::pair{x2, h2}}) {
      if (h > best_h || (h == best_h && p > best_p)) {
        best_h = h;
        best_p = p;
      }
    }
  }

  JointBias joint;
  joint.p_c1 = p_c1;
  joint.p_y1 = p_y1;
  joint.bias = bias;
  const Eigen::Matrix2d p_min = independent_table(p_c1, p_y1);
  const Eigen::Matrix2d p_max = table_from_free_cell(p_c1, p_y1, best_p);
  joint.table = (1.0 - bias) * p_min + bias * p_max;
  return joint;
}

void validate_block(const BlockGenerator& g) {
  if (g.out_dim < 1) {
    throw ValidationError("block: out_dim must be positive");
  }
  const int k = g.components();
  if (k < 1) {
    throw ValidationError("block: needs at least one mixture component");
  }
  double wsum = 0.0;
  for (int j = 0; j < k; ++j) {
    if (!(g.weights(j) >= 0.0)) {
      throw ValidationError("block: component weights must be non-negative");
    }
    wsum += g.weights(j);
  }
  if (std::abs(wsum - 1.0) > 1e-9) {
    throw ValidationError("block: component weights must sum to 1");
  }
  if (!std::isfinite(g.psi0) || !std::isfinite(g.psi1)) {
    throw ValidationError("block: psi embedding must be finite");
  }
  auto check_family = [&](const std::vector<Vector>& family, Index dim, const char* name) {
    if (static_cast<int>(family.size()) != k) {
      throw ValidationError(std::string("block: ") + name + " must have one entry per component");
    }
    for (const Vector& v : family) {
      if (v.size() != dim || !v.allFinite()) {
        throw ValidationError(std::string("block: bad ") + name);
      }
    }
  };
  if (g.kind == BlockKind::kGaussian) {
    if (g.latent_dim != g.out_dim) {
      throw ValidationError("block: gaussian latent_dim must equal out_dim");
    }
    check_family(g.mean_base, g.out_dim, "mean_base");
    check_family(g.mean_slope, g.out_dim, "mean_slope");
    check_family(g.scale, g.out_dim, "scale");
  } else {
    if (g.latent_dim < 1) {
      throw ValidationError("block: simplex latent_dim must be positive");
    }
    if (static_cast<int>(g.mix_mat.size()) != k) {
      throw ValidationError("block: mix_mat must have one entry per component");
    }
    for (const Matrix& m : g.mix_mat) {
      if (m.rows() != g.out_dim || m.cols() != g.latent_dim || !m.allFinite()) {
        throw ValidationError("block: bad mix_mat");
      }
    }
    check_family(g.psi_dir, g.out_dim, "psi_dir");
    check_family(g.offset, g.out_dim, "offset");
  }
}

namespace {

Vector random_unit(Rng& rng, Index dim) {
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = rng.uniform(-1.0, 1.0);
  const double n = v.norm();
  if (n < 1e-9) {
    v.setZero();
    v(0) = 1.0;
    return v;
  }
  return v / n;
}

}  // namespace

BlockGenerator make_gaussian_block(Rng& rng, Index out_dim, int components, double noise,
                                   double slope, bool perp_noise) {
  if (out_dim < 1 || components < 1 || noise < 0.0 || slope < 0.0) {
    throw ValidationError("make_gaussian_block: invalid arguments");
  }
  BlockGenerator g;
  g.kind = BlockKind::kGaussian;
  g.out_dim = out_dim;
  g.latent_dim = out_dim;
  g.perp_noise = perp_noise;
  g.weights = Vector::Constant(components, 1.0 / components);
  for (int j = 0; j < components; ++j) {
    Vector base(out_dim);
    for (Index i = 0; i < out_dim; ++i) base(i) = rng.uniform(-1.0, 1.0);
    g.mean_base.push_back(std::move(base));
    g.mean_slope.push_back(slope == 0.0 ? Vector::Zero(out_dim).eval()
                                        : (slope * random_unit(rng, out_dim)).eval());
    g.scale.push_back(Vector::Constant(out_dim, noise));
  }
  validate_block(g);
  return g;
}

BlockGenerator make_simplex_block(Rng& rng, Index out_dim, Index latent_dim,
                                  int components, double noise, double slope) {
  if (out_dim < 1 || latent_dim < 1 || components < 1 || noise < 0.0 || slope < 0.0) {
    throw ValidationError("make_simplex_block: invalid arguments");
  }
  BlockGenerator g;
  g.kind = BlockKind::kSimplex;
  g.out_dim = out_dim;
  g.latent_dim = latent_dim;
  g.weights = Vector::Constant(components, 1.0 / components);
  for (int j = 0; j < components; ++j) {
    Matrix a(out_dim, latent_dim);
    for (Index r = 0; r < out_dim; ++r) {
      for (Index c = 0; c < latent_dim; ++c) a(r, c) = noise * rng.uniform(-1.0, 1.0);
    }
    g.mix_mat.push_back(std::move(a));
    g.psi_dir.push_back(slope == 0.0 ? Vector::Zero(out_dim).eval()
                                     : (slope * random_unit(rng, out_dim)).eval());
    Vector off(out_dim);
    for (Index i = 0; i < out_dim; ++i) off(i) = rng.uniform(-1.0, 1.0);
    g.offset.push_back(std::move(off));
  }
  validate_block(g);
  return g;
}

BlockDraw draw_block_latent(const BlockGenerator& g, Rng& rng) {
  BlockDraw draw;
  const double u = rng.uniform();
  double acc = 0.0;
  draw.component = g.components() - 1;
  for (int j = 0; j < g.components(); ++j) {
    acc += g.weights(j);
    if (u < acc) {
      draw.component = j;
      break;
    }
  }
  draw.latent.resize(g.latent_dim);
  for (Index i = 0; i < g.latent_dim; ++i) draw.latent(i) = rng.normal();
  return draw;
}

Vector block_sample(const BlockGenerator& g, const BlockDraw& draw, double psi) {
  const auto j = static_cast<std::size_t>(draw.component);
  if (draw.component < 0 || draw.component >= g.components() ||
      draw.latent.size() != g.latent_dim) {
    throw ValidationError("block_sample: draw does not match generator");
  }
  if (g.kind == BlockKind::kGaussian) {
    Vector noise = g.scale[j].cwiseProduct(draw.latent);
    if (g.perp_noise) {
      const double slope_norm = g.mean_slope[j].norm();
      if (slope_norm > kEpsNorm) {
        const Vector unit = g.mean_slope[j] / slope_norm;
        noise -= unit * unit.dot(noise);
      }
    }
    return g.mean_base[j] + psi * g.mean_slope[j] + noise;
  }
  const Vector logits = g.mix_mat[j] * draw.latent + psi * g.psi_dir[j] + g.offset[j];
  return apply_activation(Activation::kSoftmax, logits);
}

Vector block_dxdpsi(const BlockGenerator& g, const BlockDraw& draw, double psi) {
  const auto j = static_cast<std::size_t>(draw.component);
  if (g.kind == BlockKind::kGaussian) {
    return g.mean_slope[j];
  }
  // d softmax(l)/d psi = (diag(s) - s s^T) psi_dir
  const Vector s = block_sample(g, draw, psi);
  const double mix = s.dot(g.psi_dir[j]);
  return s.array() * (g.psi_dir[j].array() - mix);
}

void validate_spec(const SyntheticSpec& spec) {
  validate_block(spec.y_block);
  validate_block(spec.c_block);
  if (!(spec.p_c1 > 0.0 && spec.p_c1 < 1.0) || !(spec.p_y1 > 0.0 && spec.p_y1 < 1.0)) {
    throw ValidationError("spec: marginals must lie strictly inside (0, 1)");
  }
  check_unit_interval(spec.bias, "bias");
  if (spec.n_samples < 0) {
    throw ValidationError("spec: n_samples must be >= 0");
  }
  if (spec.fusion == Fusion::kOuter &&
      (spec.y_block.kind != BlockKind::kSimplex || spec.c_block.kind != BlockKind::kSimplex)) {
    throw ValidationError("spec: outer fusion requires simplex-softmax blocks");
  }
}

SyntheticSpec twin_spec(const SyntheticSpec& spec) {
  SyntheticSpec twin = spec;
  twin.bias = 0.0;
  std::uint64_t sm = spec.seed ^ kTwinTag;
  twin.seed = splitmix64(sm);
  return twin;
}

Vector fuse_concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

Vector fuse_outer(const Vector& a, const Vector& b) {
  if (std::abs(a.sum() - 1.0) > 1e-9 || std::abs(b.sum() - 1.0) > 1e-9 ||
      a.minCoeff() < -1e-9 || b.minCoeff() < -1e-9) {
    throw ValidationError("fuse_outer: inputs must lie on the probability simplex");
  }
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) {
    for (Index j = 0; j < b.size(); ++j) {
      out(i * b.size() + j) = a(i) * b(j);
    }
  }
  return out;
}

Vector fuse(const SyntheticSpec& spec, const Vector& y_part, const Vector& c_part) {
  return spec.fusion == Fusion::kConcat ? fuse_concat(y_part, c_part)
                                        : fuse_outer(y_part, c_part);
}

namespace {

struct CellDraw {
  int c = 0, y = 0;
};

CellDraw draw_cell(const Eigen::Matrix2d& table, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < 2; ++y) {
      acc += table(c, y);
      if (u < acc) return {c, y};
    }
  }
  return {1, 1};
}

RowProvenance draw_row(const SyntheticSpec& spec, const Eigen::Matrix2d& table, Rng& rng) {
  RowProvenance row;
  const CellDraw cell = draw_cell(table, rng);
  row.c = cell.c;
  row.y = cell.y;
  row.y_draw = draw_block_latent(spec.y_block, rng);
  row.c_draw = draw_block_latent(spec.c_block, rng);
  return row;
}

}  // namespace

Vector row_features(const SyntheticSpec& spec, const RowProvenance& row) {
  const Vector y_part = block_sample(spec.y_block, row.y_draw, spec.y_block.psi(row.y));
  const Vector c_part = block_sample(spec.c_block, row.c_draw, spec.c_block.psi(row.c));
  return fuse(spec, y_part, c_part);
}

Vector counterfactual_features(const SyntheticSpec& spec, const RowProvenance& row) {
  const Vector y_part = block_sample(spec.y_block, row.y_draw, spec.y_block.psi(row.y));
  const Vector c_part =
      block_sample(spec.c_block, row.c_draw, spec.c_block.psi(1 - row.c));
  return fuse(spec, y_part, c_part);
}

SampleResult sample_dataset(const SyntheticSpec& spec) {
  validate_spec(spec);
  const JointBias joint = build_joint(spec.p_c1, spec.p_y1, spec.bias);
  Rng rng(spec.seed);
  SampleResult result;
  const Index n = spec.n_samples;
  const Index d = spec.feature_dim();
  result.dataset.features.resize(n, d);
  result.dataset.labels.resize(n);
  result.dataset.protected_attrs.resize(n, 1);
  for (Index j = 0; j < d; ++j) {
    result.dataset.column_names.push_back("x" + std::to_string(j));
  }
  result.dataset.protected_names = {"c0"};
  result.dataset.label_name = "y";
  result.provenance.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    RowProvenance row = draw_row(spec, joint.table, rng);
    result.dataset.features.row(i) = row_features(spec, row).transpose();
    result.dataset.labels(i) = row.y;
    result.dataset.protected_attrs(i, 0) = row.c;
    result.provenance.push_back(std::move(row));
  }
  validate_dataset(result.dataset);
  return result;
}

CounterfactualPair counterfactual_pair(const SyntheticSpec& spec, Rng& rng) {
  validate_spec(spec);
  const JointBias joint = build_joint(spec.p_c1, spec.p_y1, spec.bias);
  const RowProvenance row = draw_row(spec, joint.table, rng);
  CounterfactualPair pair;
  pair.x = row_features(spec, row);
  pair.x_flipped = counterfactual_features(spec, row);
  pair.y = row.y;
  pair.c = row.c;
  return pair;
}

Vector ifs_scores(const MlpModel& model, const SyntheticSpec& spec, Index n_pairs,
                  std::uint64_t seed) {
  validate_spec(spec);
  if (n_pairs < 1) {
    throw ValidationError("ifs_scores: n_pairs must be >= 1");
  }
  const JointBias joint = build_joint(spec.p_c1, spec.p_y1, spec.bias);
  Rng rng(seed);
  Vector scores(n_pairs);
  for (Index i = 0; i < n_pairs; ++i) {
    const RowProvenance row = draw_row(spec, joint.table, rng);
    const Vector a = forward(model, row_features(spec, row));
    const Vector b = forward(model, counterfactual_features(spec, row));
    scores(i) = (a - b).lpNorm<1>();
  }
  return scores;
}

Vector ifs_for_rows(const MlpModel& model, const SyntheticSpec& spec,
                    const std::vector<RowProvenance>& rows) {
  Vector scores(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Vector a = forward(model, row_features(spec, rows[i]));
    const Vector b = forward(model, counterfactual_features(spec, rows[i]));
    scores(static_cast<Index>(i)) = (a - b).lpNorm<1>();
  }
  return scores;
}

std::vector<int> fairness_labels(const Vector& ifs, double sigma0, double kappa) {
  if (!(sigma0 >= 0.0) || !std::isfinite(sigma0)) {
    throw ValidationError("fairness_labels: sigma0 must be finite and >= 0");
  }
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw ValidationError("fairness_labels: kappa must be finite and >= 0");
  }
  std::vector<int> labels(static_cast<std::size_t>(ifs.size()));
  const double threshold = kappa * sigma0;
  for (Index i = 0; i < ifs.size(); ++i) {
    labels[static_cast<std::size_t>(i)] = ifs(i) > threshold ? 1 : 0;
  }
  return labels;
}

Matrix true_dxdc(const SyntheticSpec& spec, const RowProvenance& row) {
  const Vector dxdpsi =
      block_dxdpsi(spec.c_block, row.c_draw, spec.c_block.psi(row.c));
  const double dpsi = spec.c_block.dpsi_dclass();
  Matrix out(spec.feature_dim(), 1);
  if (spec.fusion == Fusion::kConcat) {
    out.setZero();
    out.block(spec.y_block.out_dim, 0, spec.c_block.out_dim, 1) = dxdpsi * dpsi;
    return out;
  }
  const Vector y_part = block_sample(spec.y_block, row.y_draw, spec.y_block.psi(row.y));
  for (Index i = 0; i < y_part.size(); ++i) {
    for (Index j = 0; j < dxdpsi.size(); ++j) {
      out(i * dxdpsi.size() + j, 0) = y_part(i) * dxdpsi(j) * dpsi;
    }
  }
  return out;
}

namespace {

json vector_to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    rows.push_back(vector_to_json(m.row(r).transpose()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const Index rows = static_cast<Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  Matrix m;
  for (Index r = 0; r < rows; ++r) {
    const Vector row = vector_from_json(j.at(static_cast<std::size_t>(r)));
    if (r == 0) m.resize(rows, row.size());
    if (row.size() != m.cols()) {
      throw ValidationError("spec JSON: ragged matrix");
    }
    m.row(r) = row.transpose();
  }
  return m;
}

json block_to_json(const BlockGenerator& g) {
  json doc;
  doc["kind"] = g.kind == BlockKind::kGaussian ? "gaussian" : "simplex";
  doc["out_dim"] = g.out_dim;
  doc["latent_dim"] = g.latent_dim;
  doc["psi0"] = g.psi0;
  doc["psi1"] = g.psi1;
  doc["weights"] = vector_to_json(g.weights);
  if (g.kind == BlockKind::kGaussian) {
    json base = json::array(), slope = json::array(), scale = json::array();
    for (const auto& v : g.mean_base) base.push_back(vector_to_json(v));
    for (const auto& v : g.mean_slope) slope.push_back(vector_to_json(v));
    for (const auto& v : g.scale) scale.push_back(vector_to_json(v));
    doc["mean_base"] = std::move(base);
    doc["mean_slope"] = std::move(slope);
    doc["scale"] = std::move(scale);
    doc["perp_noise"] = g.perp_noise;
  } else {
    json mats = json::array(), dirs = json::array(), offs = json::array();
    for (const auto& m : g.mix_mat) mats.push_back(matrix_to_json(m));
    for (const auto& v : g.psi_dir) dirs.push_back(vector_to_json(v));
    for (const auto& v : g.offset) offs.push_back(vector_to_json(v));
    doc["mix_mat"] = std::move(mats);
    doc["psi_dir"] = std::move(dirs);
    doc["offset"] = std::move(offs);
  }
  return doc;
}

BlockGenerator block_from_json(const json& doc) {
  BlockGenerator g;
  const auto kind = doc.at("kind").get<std::string>();
  if (kind == "gaussian") {
    g.kind = BlockKind::kGaussian;
  } else if (kind == "simplex") {
    g.kind = BlockKind::kSimplex;
  } else {
    throw ValidationError("spec JSON: unknown block kind '" + kind + "'");
  }
  g.out_dim = doc.at("out_dim").get<Index>();
  g.latent_dim = doc.at("latent_dim").get<Index>();
  g.psi0 = doc.at("psi0").get<double>();
  g.psi1 = doc.at("psi1").get<double>();
  g.weights = vector_from_json(doc.at("weights"));
  if (g.kind == BlockKind::kGaussian) {
    for (const auto& v : doc.at("mean_base")) g.mean_base.push_back(vector_from_json(v));
    for (const auto& v : doc.at("mean_slope")) g.mean_slope.push_back(vector_from_json(v));
    for (const auto& v : doc.at("scale")) g.scale.push_back(vector_from_json(v));
    g.perp_noise = doc.at("perp_noise").get<bool>();
  } else {
    for (const auto& m : doc.at("mix_mat")) g.mix_mat.push_back(matrix_from_json(m));
    for (const auto& v : doc.at("psi_dir")) g.psi_dir.push_back(vector_from_json(v));
    for (const auto& v : doc.at("offset")) g.offset.push_back(vector_from_json(v));
  }
  validate_block(g);
  return g;
}

}  // namespace

std::string spec_to_json(const SyntheticSpec& spec) {
  json doc;
  doc["fusion"] = spec.fusion == Fusion::kConcat ? "concat" : "outer";
  doc["p_c1"] = spec.p_c1;
  doc["p_y1"] = spec.p_y1;
  doc["bias"] = spec.bias;
  doc["n_samples"] = spec.n_samples;
  doc["seed"] = spec.seed;
  doc["param_seed"] = spec.param_seed;
  doc["y_block"] = block_to_json(spec.y_block);
  doc["c_block"] = block_to_json(spec.c_block);
  return doc.dump(2) + "\n";
}

SyntheticSpec spec_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("spec JSON parse error: ") + e.what());
  }
  SyntheticSpec spec;
  try {
    const auto fusion = doc.at("fusion").get<std::string>();
    if (fusion == "concat") {
      spec.fusion = Fusion::kConcat;
    } else if (fusion == "outer") {
      spec.fusion = Fusion::kOuter;
    } else {
      throw ValidationError("spec JSON: unknown fusion '" + fusion + "'");
    }
    spec.p_c1 = doc.at("p_c1").get<double>();
    spec.p_y1 = doc.at("p_y1").get<double>();
    spec.bias = doc.at("bias").get<double>();
    spec.n_samples = doc.at("n_samples").get<Index>();
    spec.seed = doc.at("seed").get<std::uint64_t>();
    spec.param_seed = doc.at("param_seed").get<std::uint64_t>();
    spec.y_block = block_from_json(doc.at("y_block"));
    spec.c_block = block_from_json(doc.at("c_block"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("spec JSON is malformed: ") + e.what());
  }
  validate_spec(spec);
  return spec;
}

std::string provenance_to_json(const std::vector<RowProvenance>& rows) {
  json list = json::array();
  for (const auto& row : rows) {
    json entry;
    entry["y"] = row.y;
    entry["c"] = row.c;
    entry["y_component"] = row.y_draw.component;
    entry["c_component"] = row.c_draw.component;
    entry["y_latent"] = vector_to_json(row.y_draw.latent);
    entry["c_latent"] = vector_to_json(row.c_draw.latent);
    list.push_back(std::move(entry));
  }
  json doc;
  doc["rows"] = std::move(list);
  return doc.dump() + "\n";
}

std::vector<RowProvenance> provenance_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("provenance JSON parse error: ") + e.what());
  }
  std::vector<RowProvenance> rows;
  try {
    for (const auto& entry : doc.at("rows")) {
      RowProvenance row;
      row.y = entry.at("y").get<int>();
      row.c = entry.at("c").get<int>();
      row.y_draw.component = entry.at("y_component").get<int>();
      row.c_draw.component = entry.at("c_component").get<int>();
      row.y_draw.latent = vector_from_json(entry.at("y_latent"));
      row.c_draw.latent = vector_from_json(entry.at("c_latent"));
      if (row.y != 0 && row.y != 1) {
        throw ValidationError("provenance JSON: y must be 0/1");
      }
      if (row.c != 0 && row.c != 1) {
        throw ValidationError("provenance JSON: c must be 0/1");
      }
      rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("provenance JSON is malformed: ") + e.what());
  }
  return rows;
}

}  // namespace faux
