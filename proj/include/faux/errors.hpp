#pragma once

#include <stdexcept>
#include <string>

namespace faux {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Violated precondition: bad shapes, malformed configs/files, invalid values.
// The CLI maps this to exit code 2.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

// Numeric divergence: NaN losses, non-finite iterates, singular systems.
// The CLI maps this to exit code 3.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(what) {}
};

// Matrix not SPD even after regularization.
class SingularMatrixError : public DivergenceError {
 public:
  explicit SingularMatrixError(const std::string& what) : DivergenceError(what) {}
};

// Metric has no defined value on the given input (e.g. no positive labels).
class UndefinedMetricError : public ValidationError {
 public:
  explicit UndefinedMetricError(const std::string& what) : ValidationError(what) {}
};

}  // namespace faux
