#include "faux/linalg.hpp"

#include <string>

#include "faux/errors.hpp"

namespace faux {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ValidationError("matmul: dimension mismatch (" + std::to_string(a.rows()) +
                          "x" + std::to_string(a.cols()) + ") * (" +
                          std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                          ")");
  }
  return a * b;
}

Vector solve_spd(const Matrix& a, const Vector& b) {
  if (a.rows() != a.cols()) {
    throw ValidationError("solve_spd: matrix is not square");
  }
  if (a.rows() != b.size()) {
    throw ValidationError("solve_spd: right-hand side has wrong length");
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrixError("solve_spd: matrix is not positive definite");
  }
  Vector x = llt.solve(b);
  const double bnorm = b.norm();
  const double residual = (a * x - b).norm();
  if (!(residual <= 1e-10 * (bnorm > 0.0 ? bnorm : 1.0))) {
    throw SingularMatrixError("solve_spd: residual " + std::to_string(residual) +
                              " exceeds tolerance");
  }
  return x;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw ValidationError("dot: length mismatch");
  }
  return a.dot(b);
}

double norm2(const Vector& a) { return a.norm(); }

Vector normalize(const Vector& a) {
  const double n = a.norm();
  if (n <= kEpsNorm) {
    throw ValidationError("normalize: vector norm below 1e-12");
  }
  return a / n;
}

}  // namespace faux
