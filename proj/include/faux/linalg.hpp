#pragma once

#include "faux/types.hpp"

namespace faux {

// a * b with an explicit dimension check.
Matrix matmul(const Matrix& a, const Matrix& b);

// Solves a*x = b for symmetric positive definite a via Cholesky (LLT).
// Throws SingularMatrixError if the factorization fails or the solution does
// not reproduce b to relative residual 1e-10.
Vector solve_spd(const Matrix& a, const Vector& b);

double dot(const Vector& a, const Vector& b);

double norm2(const Vector& a);

// a / ||a||; throws ValidationError if ||a|| <= kEpsNorm.
Vector normalize(const Vector& a);

}  // namespace faux
