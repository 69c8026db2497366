#include "faux/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "faux/dataset.hpp"
#include "faux/errors.hpp"
#include "faux/io.hpp"
#include "faux/metrics.hpp"
#include "faux/mlp.hpp"
#include "faux/rng.hpp"
#include "faux/scores.hpp"
#include "faux/synth.hpp"
#include "faux/train.hpp"

namespace faux {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kTargetSeedTag = 0x7461726774ull;  // "targt"
constexpr std::uint64_t kAuxSeedTag = 0x617578ull;         // "aux"

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t state = seed ^ tag;
  return splitmix64(state);
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

template <typename T>
T config_get(const json& config, const std::string& key, T fallback) {
  if (!config.contains(key)) return fallback;
  try {
    return config.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config key '" + key + "': " + e.what());
  }
}

template <typename T>
T config_require(const json& config, const std::string& key) {
  if (!config.contains(key)) {
    throw ValidationError("config is missing required key '" + key + "'");
  }
  try {
    return config.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config key '" + key + "': " + e.what());
  }
}

json vector_to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const json& j, const std::string& what) {
  try {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  } catch (const json::exception& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    if (ch == ',') {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::optional<FairTest> try_test_from_name(const std::string& name) {
  for (FairTest test : {FairTest::kFaux, FairTest::kFauxNg, FairTest::kFauxIg,
                        FairTest::kFta, FairTest::kFtaWeighted, FairTest::kUnfairMap,
                        FairTest::kLicUb}) {
    if (test_name(test) == name) return test;
  }
  return std::nullopt;
}

double vector_mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double vector_median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double sample_std(const Vector& values) {
  const Index n = values.size();
  if (n < 2) return 0.0;
  const double mean = values.mean();
  return std::sqrt((values.array() - mean).square().sum() / static_cast<double>(n - 1));
}

// ---------------------------------------------------------------------------
// dataset files
// ---------------------------------------------------------------------------

fs::path sibling_with_extension(fs::path csv_path, const char* extension) {
  csv_path.replace_extension(extension);
  return csv_path;
}

struct LoadedData {
  Dataset data;
  std::optional<SyntheticSpec> spec;
  std::vector<RowProvenance> provenance;  // empty when not synthetic
};

LoadedData load_dataset(const fs::path& csv_path) {
  LoadedData loaded;
  const std::string csv_text = read_file(csv_path);
  const std::string meta_text = read_file(sibling_with_extension(csv_path, ".meta.json"));
  loaded.data = dataset_from_csv(csv_text, meta_text);
  const std::string spec_text = meta_spec_json(meta_text);
  if (!spec_text.empty()) {
    loaded.spec = spec_from_json(spec_text);
    const fs::path prov_path = sibling_with_extension(csv_path, ".prov.json");
    if (fs::exists(prov_path)) {
      loaded.provenance = provenance_from_json(read_file(prov_path));
      if (static_cast<Index>(loaded.provenance.size()) != loaded.data.n()) {
        throw ValidationError("provenance rows disagree with dataset rows in " +
                              prov_path.string());
      }
    }
  }
  return loaded;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

SyntheticSpec spec_from_recipe(const json& recipe) {
  const auto kind_name = config_get<std::string>(recipe, "kind", "gaussian");
  BlockKind kind;
  if (kind_name == "gaussian") {
    kind = BlockKind::kGaussian;
  } else if (kind_name == "simplex") {
    kind = BlockKind::kSimplex;
  } else {
    throw ValidationError("recipe: unknown kind '" + kind_name + "'");
  }
  const auto fusion_name = config_get<std::string>(recipe, "fusion", "concat");
  SyntheticSpec spec;
  if (fusion_name == "concat") {
    spec.fusion = Fusion::kConcat;
  } else if (fusion_name == "outer") {
    spec.fusion = Fusion::kOuter;
  } else {
    throw ValidationError("recipe: unknown fusion '" + fusion_name + "'");
  }

  const auto y_dim = config_get<Index>(recipe, "y_dim", 5);
  const auto c_dim = config_get<Index>(recipe, "c_dim", 5);
  const auto y_components = config_get<int>(recipe, "y_components", 1);
  const auto c_components = config_get<int>(recipe, "c_components", 1);
  const auto noise = config_get<double>(recipe, "noise", 0.5);
  const auto slope = config_get<double>(recipe, "slope", 1.0);
  const auto y_noise = config_get<double>(recipe, "y_noise", noise);
  const auto c_noise = config_get<double>(recipe, "c_noise", noise);
  const auto y_slope = config_get<double>(recipe, "y_slope", slope);
  const auto c_slope = config_get<double>(recipe, "c_slope", slope);
  const auto perp_noise = config_get<bool>(recipe, "perp_noise", false);
  const auto y_latent = config_get<Index>(recipe, "y_latent_dim", y_dim);
  const auto c_latent = config_get<Index>(recipe, "c_latent_dim", c_dim);

  spec.p_c1 = config_get<double>(recipe, "p_c1", 0.5);
  spec.p_y1 = config_get<double>(recipe, "p_y1", 0.5);
  spec.bias = config_get<double>(recipe, "bias", 0.0);
  spec.n_samples = config_get<Index>(recipe, "n_samples", 1000);
  spec.seed = config_get<std::uint64_t>(recipe, "seed", 0);
  spec.param_seed = config_get<std::uint64_t>(recipe, "param_seed", 1234567);

  Rng rng(spec.param_seed);
  if (kind == BlockKind::kGaussian) {
    spec.y_block = make_gaussian_block(rng, y_dim, y_components, y_noise, y_slope,
                                       perp_noise);
    spec.c_block = make_gaussian_block(rng, c_dim, c_components, c_noise, c_slope,
                                       perp_noise);
  } else {
    spec.y_block = make_simplex_block(rng, y_dim, y_latent, y_components, y_noise,
                                      y_slope);
    spec.c_block = make_simplex_block(rng, c_dim, c_latent, c_components, c_noise,
                                      c_slope);
  }
  validate_spec(spec);
  return spec;
}

int cmd_generate(const json& config, const fs::path& out_dir,
                 std::optional<std::uint64_t> seed) {
  SyntheticSpec spec;
  if (config.contains("spec")) {
    spec = spec_from_json(config.at("spec").dump());
  } else if (config.contains("recipe")) {
    spec = spec_from_recipe(config.at("recipe"));
  } else {
    throw ValidationError("generate config needs a 'spec' or 'recipe' object");
  }
  if (seed) spec.seed = *seed;
  const SyntheticSpec twin = twin_spec(spec);

  const SampleResult sample = sample_dataset(spec);
  const SampleResult twin_sample = sample_dataset(twin);

  const std::string spec_text = spec_to_json(spec);
  const std::string twin_text = spec_to_json(twin);
  fs::create_directories(out_dir);
  atomic_write_file(out_dir / "data.csv", dataset_to_csv(sample.dataset));
  atomic_write_file(out_dir / "data.meta.json",
                    dataset_meta_json(sample.dataset, spec_text, spec.seed));
  atomic_write_file(out_dir / "data.prov.json", provenance_to_json(sample.provenance));
  atomic_write_file(out_dir / "twin.csv", dataset_to_csv(twin_sample.dataset));
  atomic_write_file(out_dir / "twin.meta.json",
                    dataset_meta_json(twin_sample.dataset, twin_text, twin.seed));
  atomic_write_file(out_dir / "twin.prov.json",
                    provenance_to_json(twin_sample.provenance));

  json resolved;
  resolved["command"] = "generate";
  resolved["spec"] = parse_json(spec_text, "spec");
  resolved["twin_spec"] = parse_json(twin_text, "twin_spec");
  atomic_write_file(out_dir / "config_resolved.json", resolved.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.learning_rate = config_get<double>(j, "learning_rate", cfg.learning_rate);
  cfg.batch_size = config_get<int>(j, "batch_size", cfg.batch_size);
  cfg.max_epochs = config_get<int>(j, "max_epochs", cfg.max_epochs);
  cfg.patience = config_get<int>(j, "patience", cfg.patience);
  cfg.val_fraction = config_get<double>(j, "val_fraction", cfg.val_fraction);
  return cfg;
}

AdversaryConfig adversary_config_from_json(const json& j) {
  AdversaryConfig adv;
  adv.alpha = config_get<double>(j, "alpha", adv.alpha);
  adv.alpha_decay = config_get<double>(j, "alpha_decay", adv.alpha_decay);
  adv.n_adv = config_get<int>(j, "n_adv", adv.n_adv);
  adv.hidden = config_get<std::vector<Index>>(j, "hidden", adv.hidden);
  return adv;
}

double model_accuracy(const MlpModel& model, const Matrix& inputs,
                      const Matrix& targets) {
  const Matrix probs = forward_batch(model, inputs);
  Index correct = 0;
  for (Index i = 0; i < probs.rows(); ++i) {
    if (probs.cols() == 1) {
      correct += (probs(i, 0) > 0.5) == (targets(i, 0) == 1.0) ? 1 : 0;
    } else {
      Index predicted = 0, truth = 0;
      probs.row(i).maxCoeff(&predicted);
      targets.row(i).maxCoeff(&truth);
      correct += predicted == truth ? 1 : 0;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(probs.rows());
}

json train_result_json(const TrainResult& result, std::optional<double> test_accuracy) {
  json j;
  j["epochs_run"] = result.epochs_run;
  j["best_epoch"] = result.best_epoch;
  j["best_val_loss"] = result.best_val_loss;
  j["train_accuracy"] = result.train_accuracy;
  j["val_accuracy"] = result.val_accuracy;
  j["test_accuracy"] = test_accuracy ? json(*test_accuracy) : json(nullptr);
  return j;
}

int cmd_train(const json& config, const fs::path& out_dir,
              std::optional<std::uint64_t> seed_flag, bool fair) {
  const auto data_path = config_require<std::string>(config, "data");
  const LoadedData loaded = load_dataset(data_path);
  const Dataset& data = loaded.data;
  const std::uint64_t seed =
      seed_flag ? *seed_flag : config_get<std::uint64_t>(config, "seed", 0);

  const SplitIndices split = split_indices(data.n(), seed);
  std::vector<Index> train_rows = split.train;
  train_rows.insert(train_rows.end(), split.val.begin(), split.val.end());
  const Dataset train_data = take_rows(data, train_rows);
  const Dataset test_data = take_rows(data, split.test);

  const TrainConfig base_cfg = train_config_from_json(
      config.contains("train") ? config.at("train") : json::object());
  const auto hidden =
      config_get<std::vector<Index>>(config, "hidden", std::vector<Index>{16, 16});
  const auto aux_hidden =
      config_get<std::vector<Index>>(config, "aux_hidden", std::vector<Index>{16, 16});

  TrainConfig tar_cfg = base_cfg;
  tar_cfg.seed = derive_seed(seed, kTargetSeedTag);
  Rng tar_rng(tar_cfg.seed);
  const MlpModel tar_init = make_mlp(data.dim(), hidden, 1, tar_rng);
  const TrainResult tar = train(tar_init, train_data, TargetRole::kLabel, tar_cfg);

  if (data.k() < 1) {
    throw ValidationError("train: dataset has no protected columns for f_aux");
  }
  TrainConfig aux_cfg = base_cfg;
  aux_cfg.seed = derive_seed(seed, kAuxSeedTag);
  Rng aux_rng(aux_cfg.seed);
  const MlpModel aux_init = make_mlp(data.dim(), aux_hidden, data.k(), aux_rng);
  const TrainResult aux = train(aux_init, train_data, TargetRole::kProtected, aux_cfg);

  std::optional<TrainResult> fair_result;
  AdversaryConfig adv;
  if (fair) {
    adv = adversary_config_from_json(
        config.contains("adversary") ? config.at("adversary") : json::object());
    // Same init and seed as the plain target so alpha=0 reproduces it exactly.
    fair_result = train_adversarial(tar_init, train_data, tar_cfg, adv);
  }

  std::optional<double> tar_test, aux_test, fair_test;
  if (test_data.n() > 0) {
    const Matrix label_targets = test_data.labels;
    tar_test = model_accuracy(tar.model, test_data.features, label_targets);
    aux_test = model_accuracy(aux.model, test_data.features, test_data.protected_attrs);
    if (fair_result) {
      fair_test = model_accuracy(fair_result->model, test_data.features, label_targets);
    }
  }

  fs::create_directories(out_dir);
  atomic_write_file(out_dir / "model_tar.json", model_to_json(tar.model));
  atomic_write_file(out_dir / "model_aux.json", model_to_json(aux.model));
  json metrics;
  metrics["target"] = train_result_json(tar, tar_test);
  metrics["aux"] = train_result_json(aux, aux_test);
  if (fair_result) {
    atomic_write_file(out_dir / "model_fair.json", model_to_json(fair_result->model));
    metrics["fair"] = train_result_json(*fair_result, fair_test);
  }
  atomic_write_file(out_dir / "metrics.json", metrics.dump(2) + "\n");

  json resolved;
  resolved["command"] = "train";
  resolved["data"] = data_path;
  resolved["seed"] = seed;
  resolved["hidden"] = hidden;
  resolved["aux_hidden"] = aux_hidden;
  resolved["fair"] = fair;
  json train_doc;
  train_doc["learning_rate"] = base_cfg.learning_rate;
  train_doc["batch_size"] = base_cfg.batch_size;
  train_doc["max_epochs"] = base_cfg.max_epochs;
  train_doc["patience"] = base_cfg.patience;
  train_doc["val_fraction"] = base_cfg.val_fraction;
  resolved["train"] = std::move(train_doc);
  if (fair) {
    json adv_doc;
    adv_doc["alpha"] = adv.alpha;
    adv_doc["alpha_decay"] = adv.alpha_decay;
    adv_doc["n_adv"] = adv.n_adv;
    adv_doc["hidden"] = adv.hidden;
    resolved["adversary"] = std::move(adv_doc);
  }
  atomic_write_file(out_dir / "config_resolved.json", resolved.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

GradientSpace space_from_name(const std::string& name) {
  if (name == "probability") return GradientSpace::kProbability;
  if (name == "logit") return GradientSpace::kLogit;
  throw ValidationError("unknown gradient_space '" + name + "'");
}

std::string space_name(GradientSpace space) {
  return space == GradientSpace::kProbability ? "probability" : "logit";
}

IgForm ig_form_from_name(const std::string& name) {
  if (name == "normalized") return IgForm::kNormalized;
  if (name == "pseudoinverse") return IgForm::kPseudoinverse;
  throw ValidationError("unknown ig_form '" + name + "'");
}

std::string ig_form_name(IgForm form) {
  return form == IgForm::kNormalized ? "normalized" : "pseudoinverse";
}

std::vector<FairTest> tests_from_names(const std::vector<std::string>& names) {
  std::vector<FairTest> tests;
  for (const auto& name : names) tests.push_back(test_from_name(name));
  return tests;
}

std::vector<Index> select_rows(const std::string& which, Index n, std::uint64_t seed) {
  std::vector<Index> rows;
  if (which == "all") {
    rows.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
    return rows;
  }
  const SplitIndices split = split_indices(n, seed);
  if (which == "train") {
    rows = split.train;
  } else if (which == "val") {
    rows = split.val;
  } else if (which == "test") {
    rows = split.test;
  } else {
    throw ValidationError("unknown rows selection '" + which + "'");
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

int cmd_audit(const json& config, const fs::path& out_dir,
              std::optional<std::uint64_t> seed_flag, const std::string& tests_flag) {
  const auto data_path = config_require<std::string>(config, "data");
  const auto target_path = config_require<std::string>(config, "target_model");
  const auto aux_path = config_require<std::string>(config, "aux_model");
  const LoadedData loaded = load_dataset(data_path);
  const MlpModel target = model_from_json(read_file(target_path));
  const MlpModel aux = model_from_json(read_file(aux_path));
  const std::uint64_t seed =
      seed_flag ? *seed_flag : config_get<std::uint64_t>(config, "seed", 0);

  AuditConfig acfg;
  acfg.delta = config_get<double>(config, "delta", acfg.delta);
  acfg.gradient_space = space_from_name(
      config_get<std::string>(config, "gradient_space", "probability"));
  acfg.ig_steps = config_get<Index>(config, "ig_steps", acfg.ig_steps);
  acfg.ig_form = ig_form_from_name(config_get<std::string>(config, "ig_form", "normalized"));
  if (config.contains("unfair_map")) {
    const json& um = config.at("unfair_map");
    acfg.unfair_map.steps = config_get<int>(um, "steps", acfg.unfair_map.steps);
    acfg.unfair_map.step_size =
        config_get<double>(um, "step_size", acfg.unfair_map.step_size);
    acfg.unfair_map.subspace_reg =
        config_get<double>(um, "subspace_reg", acfg.unfair_map.subspace_reg);
  }
  if (!tests_flag.empty()) {
    acfg.tests = tests_from_names(split_list(tests_flag));
  } else if (config.contains("tests")) {
    acfg.tests = tests_from_names(config_get<std::vector<std::string>>(config, "tests", {}));
  }
  if (config.contains("ig_baseline")) {
    acfg.ig_baseline = vector_from_json(config.at("ig_baseline"), "ig_baseline");
  }
  if (config.contains("domain_lo")) {
    acfg.domain_lo = vector_from_json(config.at("domain_lo"), "domain_lo");
  }
  if (config.contains("domain_hi")) {
    acfg.domain_hi = vector_from_json(config.at("domain_hi"), "domain_hi");
  }

  const auto rows_name = config_get<std::string>(config, "rows", "all");
  const std::vector<Index> rows = select_rows(rows_name, loaded.data.n(), seed);
  const Dataset audit_data = take_rows(loaded.data, rows);
  std::vector<RowProvenance> prov_subset;
  if (loaded.spec && !loaded.provenance.empty()) {
    prov_subset.reserve(rows.size());
    for (Index row : rows) {
      prov_subset.push_back(loaded.provenance[static_cast<std::size_t>(row)]);
    }
  }
  const bool have_synth = loaded.spec && !prov_subset.empty();
  const SyntheticSpec* spec_ptr = have_synth ? &*loaded.spec : nullptr;
  const std::vector<RowProvenance>* prov_ptr = have_synth ? &prov_subset : nullptr;

  const AuditResult result = audit(audit_data, target, aux, acfg, spec_ptr, prov_ptr);

  // Ground-truth IFS labels when a bias-0 reference model is supplied.
  const double kappa = config_get<double>(config, "kappa", 3.0);
  const auto ifs_pairs = config_get<Index>(config, "ifs_pairs", 2000);
  const auto ref_path = config_get<std::string>(config, "ref_model", "");
  std::optional<Vector> ifs;
  std::optional<std::vector<int>> unfair;
  std::optional<double> sigma0;
  if (have_synth && !ref_path.empty()) {
    const MlpModel ref = model_from_json(read_file(ref_path));
    const SyntheticSpec twin = twin_spec(*loaded.spec);
    sigma0 = sample_std(ifs_scores(ref, twin, ifs_pairs, twin.seed));
    ifs = ifs_for_rows(target, *loaded.spec, prov_subset);
    unfair = fairness_labels(*ifs, *sigma0, kappa);
  }

  std::string csv = "row_index";
  for (FairTest test : result.tests) csv += "," + test_name(test);
  for (FairTest test : result.tests) csv += ",flag_" + test_name(test);
  if (ifs) csv += ",__ifs,__unfair";
  csv += '\n';
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const ScoreRecord& record = result.records[i];
    csv += std::to_string(rows[i]);
    for (FairTest test : result.tests) {
      csv += ',' + double_to_string(record.scores.at(test));
    }
    for (FairTest test : result.tests) {
      csv += ',' + std::to_string(record.flags.at(test));
    }
    if (ifs) {
      csv += ',' + double_to_string((*ifs)(static_cast<Index>(i)));
      csv += ',' + std::to_string((*unfair)[i]);
    }
    csv += '\n';
  }

  json summary;
  summary["n_rows"] = audit_data.n();
  summary["rows"] = rows_name;
  summary["seed"] = seed;
  summary["delta"] = result.delta;
  json test_names = json::array();
  for (FairTest test : result.tests) test_names.push_back(test_name(test));
  summary["tests"] = test_names;
  json flag_counts, score_mean, score_median;
  for (FairTest test : result.tests) {
    std::vector<double> scores;
    int flagged = 0;
    scores.reserve(result.records.size());
    for (const ScoreRecord& record : result.records) {
      scores.push_back(record.scores.at(test));
      flagged += record.flags.at(test);
    }
    flag_counts[test_name(test)] = flagged;
    score_mean[test_name(test)] = scores.empty() ? json(nullptr) : json(vector_mean(scores));
    score_median[test_name(test)] =
        scores.empty() ? json(nullptr) : json(vector_median(scores));
  }
  summary["flag_counts"] = std::move(flag_counts);
  summary["score_mean"] = std::move(score_mean);
  summary["score_median"] = std::move(score_median);
  summary["sigma0"] = sigma0 ? json(*sigma0) : json(nullptr);
  summary["kappa"] = kappa;
  summary["ifs_pairs"] = ifs_pairs;
  json notes = json::array();
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    for (const std::string& note : result.records[i].notes) {
      json item;
      item["row"] = rows[i];
      item["note"] = note;
      notes.push_back(std::move(item));
    }
  }
  summary["notes"] = std::move(notes);

  const TransparencyReport report =
      transparency(aux, audit_data, 0, acfg.gradient_space);

  fs::create_directories(out_dir);
  atomic_write_file(out_dir / "scores.csv", csv);
  atomic_write_file(out_dir / "summary.json", summary.dump(2) + "\n");
  atomic_write_file(out_dir / "transparency.json", transparency_to_json(report));

  json resolved;
  resolved["command"] = "audit";
  resolved["data"] = data_path;
  resolved["target_model"] = target_path;
  resolved["aux_model"] = aux_path;
  resolved["ref_model"] = ref_path.empty() ? json(nullptr) : json(ref_path);
  resolved["rows"] = rows_name;
  resolved["seed"] = seed;
  resolved["delta"] = acfg.delta;
  resolved["gradient_space"] = space_name(acfg.gradient_space);
  resolved["ig_steps"] = acfg.ig_steps;
  resolved["ig_form"] = ig_form_name(acfg.ig_form);
  resolved["ig_baseline"] = vector_to_json(result.ig_baseline);
  resolved["domain_lo"] = vector_to_json(result.domain_lo);
  resolved["domain_hi"] = vector_to_json(result.domain_hi);
  json um;
  um["steps"] = acfg.unfair_map.steps;
  um["step_size"] = acfg.unfair_map.step_size;
  um["subspace_reg"] = acfg.unfair_map.subspace_reg;
  resolved["unfair_map"] = std::move(um);
  resolved["tests"] = test_names;
  resolved["kappa"] = kappa;
  resolved["ifs_pairs"] = ifs_pairs;
  atomic_write_file(out_dir / "config_resolved.json", resolved.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct ScoresFile {
  Index n = 0;
  std::vector<std::string> test_names;  // known score columns, header order
  std::map<std::string, Vector> scores;
  std::optional<std::vector<int>> unfair;
};

ScoresFile read_scores_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  const auto& header = rows.front();
  ScoresFile file;
  file.n = static_cast<Index>(rows.size()) - 1;
  std::map<std::string, std::size_t> column;
  for (std::size_t j = 0; j < header.size(); ++j) column[header[j]] = j;
  for (const auto& name : header) {
    if (try_test_from_name(name)) file.test_names.push_back(name);
  }
  for (const auto& name : file.test_names) {
    Vector values(file.n);
    for (Index i = 0; i < file.n; ++i) {
      values(i) = parse_double(rows[static_cast<std::size_t>(i) + 1][column.at(name)]);
    }
    file.scores[name] = std::move(values);
  }
  if (column.count("__unfair") != 0) {
    std::vector<int> labels(static_cast<std::size_t>(file.n));
    for (Index i = 0; i < file.n; ++i) {
      const std::string& token = rows[static_cast<std::size_t>(i) + 1][column.at("__unfair")];
      if (token != "0" && token != "1") {
        throw ValidationError("scores CSV: __unfair must be 0/1");
      }
      labels[static_cast<std::size_t>(i)] = token == "1" ? 1 : 0;
    }
    file.unfair = std::move(labels);
  }
  return file;
}

int cmd_evaluate(const json& config, const fs::path& out_dir,
                 const std::string& tests_flag, bool svg_flag) {
  const auto scores_path = config_require<std::string>(config, "scores");
  const ScoresFile main_file = read_scores_csv(read_file(scores_path));
  const bool svg = svg_flag || config_get<bool>(config, "svg", false);

  std::vector<std::string> tests = main_file.test_names;
  const std::vector<std::string> requested =
      !tests_flag.empty() ? split_list(tests_flag)
                          : config_get<std::vector<std::string>>(config, "tests", {});
  if (!requested.empty()) {
    for (const auto& name : requested) {
      if (main_file.scores.count(name) == 0) {
        throw ValidationError("evaluate: scores file has no column '" + name + "'");
      }
    }
    tests = requested;
  }

  const auto fair_path = config_get<std::string>(config, "fair_scores", "");
  std::optional<ScoresFile> fair_file;
  if (!fair_path.empty()) fair_file = read_scores_csv(read_file(fair_path));
  if (!main_file.unfair && !fair_file) {
    throw ValidationError(
        "evaluate: scores file lacks a __unfair ground-truth column and no "
        "fair_scores file was given");
  }

  fs::create_directories(out_dir);
  json metrics;
  metrics["n_rows"] = main_file.n;
  metrics["tests"] = tests;

  if (main_file.unfair) {
    const std::vector<int>& labels = *main_file.unfair;
    int positives = 0;
    for (int label : labels) positives += label;
    metrics["positives"] = positives;
    metrics["prevalence"] =
        main_file.n > 0
            ? json(static_cast<double>(positives) / static_cast<double>(main_file.n))
            : json(nullptr);
    json ap_doc;
    for (const auto& name : tests) {
      const Vector& scores = main_file.scores.at(name);
      if (positives == 0) {
        ap_doc[name] = nullptr;
        continue;
      }
      const PrCurve curve = pr_curve(scores, labels);
      ap_doc[name] = curve.average_precision;
      atomic_write_file(out_dir / ("pr_" + name + ".csv"), pr_curve_to_csv(curve));
      if (svg) {
        atomic_write_file(out_dir / ("pr_" + name + ".svg"),
                          pr_curve_to_svg(curve, name));
      }
    }
    metrics["average_precision"] = std::move(ap_doc);
  } else {
    metrics["average_precision"] = nullptr;
    metrics["prevalence"] = nullptr;
  }

  const auto transparency_path = config_get<std::string>(config, "transparency", "");
  const auto eval_data_path = config_get<std::string>(config, "data", "");
  if (!transparency_path.empty() && !eval_data_path.empty()) {
    const TransparencyReport report =
        transparency_from_json(read_file(transparency_path));
    const LoadedData loaded = load_dataset(eval_data_path);
    metrics["transparency_ndcg"] = transparency_ndcg(report, loaded.data);
  } else {
    metrics["transparency_ndcg"] = nullptr;
  }

  if (fair_file) {
    json comparison;
    for (const auto& name : tests) {
      if (fair_file->scores.count(name) == 0) continue;
      const DistributionComparison summary =
          compare_models(fair_file->scores.at(name), main_file.scores.at(name));
      json item;
      item["fair_median"] = summary.fair_median;
      item["fair_iqr"] = summary.fair_iqr;
      item["unfair_median"] = summary.unfair_median;
      item["unfair_iqr"] = summary.unfair_iqr;
      item["prob_unfair_greater"] = summary.prob_unfair_greater;
      comparison[name] = std::move(item);
    }
    metrics["comparison"] = std::move(comparison);
  } else {
    metrics["comparison"] = nullptr;
  }

  atomic_write_file(out_dir / "metrics.json", metrics.dump(2) + "\n");

  json resolved;
  resolved["command"] = "evaluate";
  resolved["scores"] = scores_path;
  resolved["fair_scores"] = fair_path.empty() ? json(nullptr) : json(fair_path);
  resolved["transparency"] =
      transparency_path.empty() ? json(nullptr) : json(transparency_path);
  resolved["data"] = eval_data_path.empty() ? json(nullptr) : json(eval_data_path);
  resolved["tests"] = tests;
  resolved["svg"] = svg;
  atomic_write_file(out_dir / "config_resolved.json", resolved.dump(2) + "\n");
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"fauxaudit: individual-fairness audit toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string tests;
  std::optional<std::uint64_t> seed;
  bool fair = false;
  bool svg = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--out", out_dir, "output directory (default .)");
    cmd->add_option("--seed", seed, "overrides the config seed");
    return cmd;
  };
  CLI::App* generate = add_common(
      app.add_subcommand("generate", "sample a synthetic dataset and its bias-0 twin"));
  CLI::App* train_cmd =
      add_common(app.add_subcommand("train", "train target and auxiliary models"));
  train_cmd->add_flag("--fair", fair, "also train an adversarially debiased target");
  CLI::App* audit_cmd =
      add_common(app.add_subcommand("audit", "run fairness tests over a dataset"));
  audit_cmd->add_option("--tests", tests, "comma-separated test subset");
  CLI::App* evaluate_cmd = add_common(
      app.add_subcommand("evaluate", "ranking metrics and model comparisons"));
  evaluate_cmd->add_option("--tests", tests, "comma-separated test subset");
  evaluate_cmd->add_flag("--svg", svg, "render PR curves as SVG");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const json config = config_path.empty()
                            ? json::object()
                            : parse_json(read_file(config_path), "config file");
    const fs::path out = out_dir;
    if (generate->parsed()) return cmd_generate(config, out, seed);
    if (train_cmd->parsed()) return cmd_train(config, out, seed, fair);
    if (audit_cmd->parsed()) return cmd_audit(config, out, seed, tests);
    if (evaluate_cmd->parsed()) return cmd_evaluate(config, out, tests, svg);
    throw ValidationError("no subcommand given");
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace faux
