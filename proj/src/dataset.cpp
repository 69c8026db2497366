#include "faux/dataset.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "faux/errors.hpp"
#include "faux/io.hpp"
#include "faux/rng.hpp"

namespace faux {
namespace {

using nlohmann::json;

constexpr std::uint64_t kSplitTag = 0x51117f00ddeed123ull;

bool is_binary01(double v) { return v == 0.0 || v == 1.0; }

}  // namespace

void validate_dataset(const Dataset& data) {
  const Index n = data.features.rows();
  if (data.labels.size() != n) {
    throw ValidationError("dataset: labels length disagrees with feature rows");
  }
  if (data.protected_attrs.rows() != n) {
    throw ValidationError("dataset: protected rows disagree with feature rows");
  }
  if (static_cast<Index>(data.column_names.size()) != data.features.cols()) {
    throw ValidationError("dataset: column_names length disagrees with feature width");
  }
  if (static_cast<Index>(data.protected_names.size()) != data.protected_attrs.cols()) {
    throw ValidationError("dataset: protected_names length disagrees with width");
  }
  if (!data.features.allFinite()) {
    throw ValidationError("dataset: features contain non-finite values");
  }
  for (Index i = 0; i < n; ++i) {
    if (!is_binary01(data.labels(i))) {
      throw ValidationError("dataset: label at row " + std::to_string(i) +
                            " is not 0/1");
    }
    for (Index j = 0; j < data.protected_attrs.cols(); ++j) {
      if (!is_binary01(data.protected_attrs(i, j))) {
        throw ValidationError("dataset: protected value at row " + std::to_string(i) +
                              " is not 0/1");
      }
    }
  }
  for (const auto& group : data.one_hot_groups) {
    for (int idx : group) {
      if (idx < 0 || idx >= data.features.cols()) {
        throw ValidationError("dataset: one-hot group index out of range");
      }
    }
  }
  if (data.ifs && data.ifs->size() != n) {
    throw ValidationError("dataset: ifs length disagrees with rows");
  }
  if (data.unfair) {
    if (!data.ifs) {
      throw ValidationError("dataset: unfair labels require ifs scores");
    }
    if (static_cast<Index>(data.unfair->size()) != n) {
      throw ValidationError("dataset: unfair length disagrees with rows");
    }
  }
}

std::string dataset_to_csv(const Dataset& data) {
  validate_dataset(data);
  std::string out;
  for (Index j = 0; j < data.features.cols(); ++j) {
    out += data.column_names[static_cast<std::size_t>(j)];
    out += ',';
  }
  out += data.label_name;
  for (const auto& name : data.protected_names) {
    out += ',';
    out += name;
  }
  if (data.ifs) out += ",__ifs";
  if (data.unfair) out += ",__unfair";
  out += '\n';
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.features.cols(); ++j) {
      out += double_to_string(data.features(i, j));
      out += ',';
    }
    out += double_to_string(data.labels(i));
    for (Index j = 0; j < data.protected_attrs.cols(); ++j) {
      out += ',';
      out += double_to_string(data.protected_attrs(i, j));
    }
    if (data.ifs) {
      out += ',';
      out += double_to_string((*data.ifs)(i));
    }
    if (data.unfair) {
      out += ',';
      out += std::to_string((*data.unfair)[static_cast<std::size_t>(i)]);
    }
    out += '\n';
  }
  return out;
}

std::string dataset_meta_json(const Dataset& data, const std::string& spec_json,
                              std::uint64_t seed) {
  json doc;
  doc["column_names"] = data.column_names;
  doc["one_hot_groups"] = data.one_hot_groups;
  doc["protected_columns"] = data.protected_names;
  doc["label_column"] = data.label_name;
  doc["seed"] = seed;
  if (spec_json.empty()) {
    doc["spec"] = nullptr;
  } else {
    doc["spec"] = json::parse(spec_json);
  }
  return doc.dump(2) + "\n";
}

std::string meta_spec_json(const std::string& meta_text) {
  json doc;
  try {
    doc = json::parse(meta_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("sidecar JSON parse error: ") + e.what());
  }
  if (!doc.contains("spec") || doc["spec"].is_null()) return "";
  return doc["spec"].dump();
}

Dataset dataset_from_csv(const std::string& csv_text, const std::string& meta_text) {
  json meta;
  try {
    meta = json::parse(meta_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("sidecar JSON parse error: ") + e.what());
  }
  Dataset data;
  try {
    data.column_names = meta.at("column_names").get<std::vector<std::string>>();
    data.one_hot_groups = meta.at("one_hot_groups").get<std::vector<std::vector<int>>>();
    data.protected_names = meta.at("protected_columns").get<std::vector<std::string>>();
    data.label_name = meta.at("label_column").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("sidecar JSON is malformed: ") + e.what());
  }

  const auto rows = parse_csv(csv_text);
  const auto& header = rows.front();
  const Index d = static_cast<Index>(data.column_names.size());
  const Index k = static_cast<Index>(data.protected_names.size());
  std::vector<std::string> expected(data.column_names);
  expected.push_back(data.label_name);
  expected.insert(expected.end(), data.protected_names.begin(), data.protected_names.end());
  bool has_ifs = false, has_unfair = false;
  if (header.size() == expected.size() + 1 && header.back() == "__ifs") {
    has_ifs = true;
  } else if (header.size() == expected.size() + 2 &&
             header[header.size() - 2] == "__ifs" && header.back() == "__unfair") {
    has_ifs = has_unfair = true;
  } else if (header.size() != expected.size()) {
    throw ValidationError("CSV header does not match sidecar columns");
  }
  for (std::size_t j = 0; j < expected.size(); ++j) {
    if (header[j] != expected[j]) {
      throw ValidationError("CSV header column '" + header[j] + "' does not match sidecar '" +
                            expected[j] + "'");
    }
  }

  const Index n = static_cast<Index>(rows.size()) - 1;
  data.features.resize(n, d);
  data.labels.resize(n);
  data.protected_attrs.resize(n, k);
  if (has_ifs) data.ifs = Vector(n);
  if (has_unfair) data.unfair = std::vector<int>(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i) + 1];
    std::size_t col = 0;
    for (Index j = 0; j < d; ++j) data.features(i, j) = parse_double(row[col++]);
    data.labels(i) = parse_double(row[col++]);
    for (Index j = 0; j < k; ++j) data.protected_attrs(i, j) = parse_double(row[col++]);
    if (has_ifs) (*data.ifs)(i) = parse_double(row[col++]);
    if (has_unfair) {
      (*data.unfair)[static_cast<std::size_t>(i)] =
          static_cast<int>(parse_double(row[col++]));
    }
  }
  validate_dataset(data);
  return data;
}

Dataset ingest_csv(const std::string& csv_text, const std::string& label_column,
                   const std::vector<ProtectedSpec>& protected_specs) {
  const auto rows = parse_csv(csv_text);
  const auto& header = rows.front();
  const std::size_t width = header.size();
  const std::size_t n = rows.size() - 1;

  auto column_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t j = 0; j < width; ++j) {
      if (header[j] == name) return j;
    }
    throw ValidationError("column '" + name + "' not found in CSV header");
  };

  const std::size_t label_idx = column_index(label_column);
  std::map<std::size_t, const ProtectedSpec*> protected_cols;
  for (const auto& spec : protected_specs) {
    protected_cols[column_index(spec.column)] = &spec;
  }
  if (protected_cols.size() != protected_specs.size()) {
    throw ValidationError("duplicate protected column in config");
  }
  if (protected_cols.count(label_idx)) {
    throw ValidationError("label column '" + label_column + "' cannot be protected");
  }

  // Decide per input column: numeric feature vs categorical (one-hot).
  std::vector<bool> numeric(width, true);
  std::vector<std::vector<std::string>> categories(width);
  for (std::size_t j = 0; j < width; ++j) {
    if (j == label_idx || protected_cols.count(j)) continue;
    std::set<std::string> seen;
    for (std::size_t i = 1; i <= n; ++i) {
      double unused;
      if (!try_parse_double(rows[i][j], unused)) {
        numeric[j] = false;
        seen.insert(rows[i][j]);
      }
    }
    if (!numeric[j]) {
      // Non-numeric column: every value becomes a category.
      seen.clear();
      for (std::size_t i = 1; i <= n; ++i) seen.insert(rows[i][j]);
      categories[j].assign(seen.begin(), seen.end());
    }
  }

  Dataset data;
  data.label_name = label_column;
  std::vector<std::pair<std::size_t, int>> feature_layout;  // (input col, category or -1)
  for (std::size_t j = 0; j < width; ++j) {
    if (j == label_idx || protected_cols.count(j)) continue;
    if (numeric[j]) {
      data.column_names.push_back(header[j]);
      feature_layout.emplace_back(j, -1);
    } else {
      std::vector<int> group;
      for (std::size_t v = 0; v < categories[j].size(); ++v) {
        group.push_back(static_cast<int>(data.column_names.size()));
        data.column_names.push_back(header[j] + "=" + categories[j][v]);
        feature_layout.emplace_back(j, static_cast<int>(v));
      }
      data.one_hot_groups.push_back(std::move(group));
    }
  }

  const Index d = static_cast<Index>(data.column_names.size());
  data.features.resize(static_cast<Index>(n), d);
  data.labels.resize(static_cast<Index>(n));
  data.protected_attrs.resize(static_cast<Index>(n),
                              static_cast<Index>(protected_specs.size()));
  for (const auto& spec : protected_specs) data.protected_names.push_back(spec.column);

  for (std::size_t i = 1; i <= n; ++i) {
    const auto& row = rows[i];
    const Index r = static_cast<Index>(i) - 1;
    for (Index f = 0; f < d; ++f) {
      const auto [col, cat] = feature_layout[static_cast<std::size_t>(f)];
      if (cat < 0) {
        double value;
        if (!try_parse_double(row[col], value)) {
          throw ValidationError("column '" + header[col] + "' row " + std::to_string(i) +
                                ": not numeric");
        }
        data.features(r, f) = value;
      } else {
        data.features(r, f) =
            row[col] == categories[col][static_cast<std::size_t>(cat)] ? 1.0 : 0.0;
      }
    }
    double label;
    if (!try_parse_double(row[label_idx], label) || !is_binary01(label)) {
      throw ValidationError("label column '" + label_column + "' row " +
                            std::to_string(i) + ": not 0/1");
    }
    data.labels(r) = label;
    Index pk = 0;
    for (const auto& spec : protected_specs) {
      const std::size_t col = column_index(spec.column);
      double value = 0.0;
      if (spec.threshold.has_value()) {
        double raw;
        if (!try_parse_double(row[col], raw)) {
          throw ValidationError("protected column '" + spec.column + "' row " +
                                std::to_string(i) + ": not numeric");
        }
        value = raw > *spec.threshold ? 1.0 : 0.0;
      } else if (!spec.positives.empty()) {
        value = std::find(spec.positives.begin(), spec.positives.end(), row[col]) !=
                        spec.positives.end()
                    ? 1.0
                    : 0.0;
      } else {
        double raw;
        if (!try_parse_double(row[col], raw) || !is_binary01(raw)) {
          throw ValidationError("protected column '" + spec.column + "' row " +
                                std::to_string(i) +
                                ": not 0/1 and no binarization rule given");
        }
        value = raw;
      }
      data.protected_attrs(r, pk++) = value;
    }
  }
  validate_dataset(data);
  return data;
}

SplitIndices split_indices(Index n, std::uint64_t seed) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng = Rng::derive(seed, kSplitTag);
  rng.shuffle(order);
  const Index n_test = static_cast<Index>(std::lround(0.15 * static_cast<double>(n)));
  const Index n_val = static_cast<Index>(std::lround(0.15 * static_cast<double>(n)));
  SplitIndices split;
  split.test.assign(order.begin(), order.begin() + n_test);
  split.val.assign(order.begin() + n_test, order.begin() + n_test + n_val);
  split.train.assign(order.begin() + n_test + n_val, order.end());
  return split;
}

Dataset take_rows(const Dataset& data, const std::vector<Index>& rows) {
  Dataset out;
  out.column_names = data.column_names;
  out.protected_names = data.protected_names;
  out.label_name = data.label_name;
  out.one_hot_groups = data.one_hot_groups;
  const Index m = static_cast<Index>(rows.size());
  out.features.resize(m, data.features.cols());
  out.labels.resize(m);
  out.protected_attrs.resize(m, data.protected_attrs.cols());
  if (data.ifs) out.ifs = Vector(m);
  if (data.unfair) out.unfair = std::vector<int>(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    const Index src = rows[static_cast<std::size_t>(i)];
    if (src < 0 || src >= data.n()) {
      throw ValidationError("take_rows: row index out of range");
    }
    out.features.row(i) = data.features.row(src);
    out.labels(i) = data.labels(src);
    out.protected_attrs.row(i) = data.protected_attrs.row(src);
    if (data.ifs) (*out.ifs)(i) = (*data.ifs)(src);
    if (data.unfair) (*out.unfair)[static_cast<std::size_t>(i)] = (*data.unfair)[static_cast<std::size_t>(src)];
  }
  return out;
}

}  // namespace faux
