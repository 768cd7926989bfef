#pragma once

#include "fecam/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace fecam::test {

inline RowMatrix gaussian_rows(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  }
  return out;
}

/// G G^T / cols + ridge * I for a square Gaussian G.
inline Eigen::MatrixXd random_spd(Eigen::Index dim, std::mt19937_64& rng, double ridge = 0.1) {
  const Eigen::MatrixXd g = gaussian_rows(dim, dim, rng);
  Eigen::MatrixXd out = g * g.transpose() / static_cast<double>(dim);
  out.diagonal().array() += ridge;
  return 0.5 * (out + out.transpose());
}

inline double relative_error(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  const double denom = want.norm();
  return denom == 0.0 ? got.norm() : (got - want).norm() / denom;
}

}  // namespace fecam::test
