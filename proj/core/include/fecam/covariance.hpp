#pragma once

#include "fecam/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fecam {

/// Conditioning stage of a covariance. Transitions are one-way:
/// raw -> shrunk -> normalized.
enum class Stage : std::uint8_t { kRaw = 0, kShrunk = 1, kNormalized = 2 };

std::string_view to_string(Stage stage);

/// Divisor used when estimating a covariance from n rows.
enum class Divisor : std::uint8_t {
  kPopulation = 0,  // 1/n, maximum-likelihood fit
  kUnbiased = 1,    // 1/(n-1)
};

/// Number of entries in the packed lower triangle of a dim x dim matrix.
constexpr std::size_t packed_size(std::size_t dim) { return dim * (dim + 1) / 2; }

/// Offset of (row, col), row >= col, in a packed row-major lower triangle.
constexpr std::size_t packed_index(std::size_t row, std::size_t col) {
  return row * (row + 1) / 2 + col;
}

/// Symmetric matrix stored as its lower triangle, so entry (i,j) and (j,i)
/// are the same number.
class CovarianceMatrix {
 public:
  CovarianceMatrix() = default;

  /// Takes the lower triangle of `dense`. Throws DimensionError if it is not
  /// square and InputError if it is not symmetric within `symmetry_tol`
  /// (relative to the largest magnitude entry).
  static CovarianceMatrix from_dense(const Eigen::MatrixXd& dense, Stage stage,
                                     std::size_t source_count = 0,
                                     double symmetry_tol = 1e-12);
  static CovarianceMatrix from_packed(std::size_t dim, std::vector<double> lower, Stage stage,
                                      std::size_t source_count = 0);
  static CovarianceMatrix identity(std::size_t dim, Stage stage = Stage::kRaw);
  static CovarianceMatrix diagonal(const Vector& variances, Stage stage = Stage::kRaw,
                                   std::size_t source_count = 0);

  std::size_t dim() const { return dim_; }
  Stage stage() const { return stage_; }
  std::size_t source_count() const { return source_count_; }

  double operator()(std::size_t i, std::size_t j) const {
    return i >= j ? lower_[packed_index(i, j)] : lower_[packed_index(j, i)];
  }

  std::span<const double> packed() const { return lower_; }
  Eigen::MatrixXd to_dense() const;
  Vector diagonal_entries() const;

  friend bool operator==(const CovarianceMatrix&, const CovarianceMatrix&) = default;

 private:
  CovarianceMatrix(std::size_t dim, std::vector<double> lower, Stage stage,
                   std::size_t source_count)
      : dim_(dim), stage_(stage), source_count_(source_count), lower_(std::move(lower)) {}

  std::size_t dim_ = 0;
  Stage stage_ = Stage::kRaw;
  std::size_t source_count_ = 0;
  std::vector<double> lower_;
};

/// Cholesky factorization of a conditioned covariance. Distances are
/// evaluated through triangular solves against the factor.
class PrecisionMatrix {
 public:
  PrecisionMatrix() = default;

  std::size_t dim() const { return dim_; }
  double log_det() const { return log_det_; }

  /// Packed lower-triangular factor L with L L^T equal to the input matrix.
  std::span<const double> factor() const { return factor_; }
  Eigen::MatrixXd factor_dense() const;

  /// Overwrites `v` with L^{-1} v (forward substitution).
  void whiten_in_place(std::span<double> v) const;

  /// Returns Sigma^{-1} v.
  Vector solve(const Vector& v) const;

  /// ||L^{-1} diff||^2, i.e. diff^T Sigma^{-1} diff.
  double quadratic_form(const Vector& diff) const;

  /// (L^{-1})^T rounded to single precision; upper triangular. Used only by
  /// the batched screening kernel, whose shortlisted candidates are
  /// re-scored through `quadratic_form`.
  const Eigen::MatrixXf& screening_transform() const { return screening_; }

 private:
  friend PrecisionMatrix invert_spd(const CovarianceMatrix& cov);

  std::size_t dim_ = 0;
  double log_det_ = 0.0;
  std::vector<double> factor_;
  Eigen::MatrixXf screening_;
};

/// Variances divided by the Euclidean norm of the variance vector.
struct DiagonalModel {
  Vector variances;
  double norm = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(variances.size()); }
};

/// (1/n) sum_k (x_k - mean)(x_k - mean)^T, or 1/(n-1) with Divisor::kUnbiased.
CovarianceMatrix estimate_covariance(const RowMatrix& features, const Vector& mean,
                                     Divisor divisor = Divisor::kPopulation);

/// Sigma + gamma1 * V1 * I + gamma2 * V2 * (1 - I), where V1 is the mean
/// diagonal entry and V2 the mean off-diagonal entry. Requires a raw input.
/// A zero V1 with gamma1 > 0 is rejected rather than patched.
CovarianceMatrix shrink(const CovarianceMatrix& cov, double gamma1, double gamma2);

/// Rescales to unit diagonal: S(i,j) / sqrt(S(i,i) S(j,j)). Requires a
/// shrunk input with a strictly positive diagonal.
CovarianceMatrix normalize_correlation(const CovarianceMatrix& cov);

/// Cholesky factorization of a shrunk or normalized matrix. Never
/// regularizes; a non-positive-definite input throws FactorizationError.
PrecisionMatrix invert_spd(const CovarianceMatrix& cov);

/// Diagonal of a shrunk matrix divided by its Euclidean norm.
DiagonalModel normalize_diagonal(const CovarianceMatrix& cov);

/// Class-count weighted running mean of raw covariances:
/// prev * n_prev / n_total + task * (n_total - n_prev) / n_total.
/// With n_prev == 0 the task matrix is returned unchanged.
CovarianceMatrix merge_common(const CovarianceMatrix& prev, std::size_t n_classes_prev,
                              const CovarianceMatrix& task, std::size_t n_classes_total);

/// Elementwise mean of two raw matrices (domain-incremental update).
CovarianceMatrix average_domain(const CovarianceMatrix& prev, const CovarianceMatrix& curr);

}  // namespace fecam
