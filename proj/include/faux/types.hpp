#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace faux {

// All numeric work is double precision; matrices are dense Eigen types.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Tolerance below which a vector norm is treated as zero.
inline constexpr double kEpsNorm = 1e-12;
// Ridge added to gram matrices before solving.
inline constexpr double kEpsRidge = 1e-9;

}  // namespace faux
