#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "faux/types.hpp"

namespace faux {

// Tabular dataset: numeric features, a binary label, and one or more binary
// protected-attribute columns. Categorical inputs are one-hot expanded at
// ingestion; member indices of each expansion are kept in one_hot_groups.
struct Dataset {
  Matrix features;  // n x d
  Vector labels;    // n, each 0 or 1
  Matrix protected_attrs;  // n x k, each 0 or 1
  std::vector<std::string> column_names;     // d
  std::vector<std::string> protected_names;  // k
  std::string label_name = "y";
  std::vector<std::vector<int>> one_hot_groups;
  std::optional<Vector> ifs;               // per-row ground-truth IFS
  std::optional<std::vector<int>> unfair;  // per-row fairness label; needs ifs

  Index n() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  Index k() const { return protected_attrs.cols(); }
};

// Throws ValidationError on shape/value violations (labels and protected
// attributes must be 0/1; unfair requires ifs; name counts must match).
void validate_dataset(const Dataset& data);

// CSV text with header: features, label, protected columns, then __ifs and
// __unfair when present. Floats use shortest round-trip decimals.
std::string dataset_to_csv(const Dataset& data);

// Sidecar JSON describing the CSV columns. `spec_json` (optional, serialized
// synthetic spec) and `seed` are recorded verbatim.
std::string dataset_meta_json(const Dataset& data, const std::string& spec_json,
                              std::uint64_t seed);

// Reads a dataset from CSV + sidecar text. Inverse of dataset_to_csv /
// dataset_meta_json; numeric values round-trip bit-exactly.
Dataset dataset_from_csv(const std::string& csv_text, const std::string& meta_text);

// Extracts the serialized spec from a sidecar, empty string if absent.
std::string meta_spec_json(const std::string& meta_text);

// How to binarize one protected column of a raw CSV.
struct ProtectedSpec {
  std::string column;
  // Exactly one of the two is used: value > threshold, or value in one of
  // `positives` (string match for categorical columns).
  std::optional<double> threshold;
  std::vector<std::string> positives;
};

// Ingests a raw CSV: numeric columns pass through, non-numeric columns are
// one-hot expanded as "<name>=<value>" (grouped), the label column must be
// binary, and protected columns are binarized per spec and removed from the
// feature block. Errors name the offending column.
Dataset ingest_csv(const std::string& csv_text, const std::string& label_column,
                   const std::vector<ProtectedSpec>& protected_specs);

// Deterministic 70/15/15 row split.
struct SplitIndices {
  std::vector<Index> train, val, test;
};
SplitIndices split_indices(Index n, std::uint64_t seed);

// Row subset in the given order.
Dataset take_rows(const Dataset& data, const std::vector<Index>& rows);

}  // namespace faux
