#include "fecam/covariance.hpp"

#include "fecam/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fecam {
namespace {

void require_stage(const CovarianceMatrix& cov, Stage expected, const char* op) {
  if (cov.stage() != expected) {
    throw StageError(std::string(op) + " expects a " + std::string(to_string(expected)) +
                     " covariance, got " + std::string(to_string(cov.stage())));
  }
}

void require_same_dim(const CovarianceMatrix& a, const CovarianceMatrix& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw DimensionError(std::string(op) + ": dimension mismatch (" + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()) + ")");
  }
}

void require_gamma(double gamma, const char* name) {
  if (!std::isfinite(gamma) || gamma < 0.0) {
    throw InputError(std::string("shrinkage ") + name + " must be a finite nonnegative value, got " +
                     std::to_string(gamma));
  }
}

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kRaw:
      return "raw";
    case Stage::kShrunk:
      return "shrunk";
    case Stage::kNormalized:
      return "normalized";
  }
  return "unknown";
}

CovarianceMatrix CovarianceMatrix::from_dense(const Eigen::MatrixXd& dense, Stage stage,
                                              std::size_t source_count, double symmetry_tol) {
  if (dense.rows() != dense.cols()) {
    throw DimensionError("covariance must be square, got " + std::to_string(dense.rows()) + "x" +
                         std::to_string(dense.cols()));
  }
  const auto dim = static_cast<std::size_t>(dense.rows());
  const double scale = dim == 0 ? 0.0 : dense.cwiseAbs().maxCoeff();
  std::vector<double> lower(packed_size(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double a = dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double b = dense(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      if (!std::isfinite(a) || !std::isfinite(b)) {
        throw InputError("covariance contains a non-finite entry at (" + std::to_string(i) + ", " +
                         std::to_string(j) + ")");
      }
      if (std::abs(a - b) > symmetry_tol * scale) {
        throw InputError("covariance is not symmetric at (" + std::to_string(i) + ", " +
                         std::to_string(j) + ")");
      }
      lower[packed_index(i, j)] = a;
    }
  }
  return CovarianceMatrix(dim, std::move(lower), stage, source_count);
}

CovarianceMatrix CovarianceMatrix::from_packed(std::size_t dim, std::vector<double> lower,
                                               Stage stage, std::size_t source_count) {
  if (lower.size() != packed_size(dim)) {
    throw DimensionError("packed covariance of dimension " + std::to_string(dim) + " needs " +
                         std::to_string(packed_size(dim)) + " entries, got " +
                         std::to_string(lower.size()));
  }
  return CovarianceMatrix(dim, std::move(lower), stage, source_count);
}

CovarianceMatrix CovarianceMatrix::identity(std::size_t dim, Stage stage) {
  std::vector<double> lower(packed_size(dim), 0.0);
  for (std::size_t i = 0; i < dim; ++i) lower[packed_index(i, i)] = 1.0;
  return CovarianceMatrix(dim, std::move(lower), stage, 0);
}

CovarianceMatrix CovarianceMatrix::diagonal(const Vector& variances, Stage stage,
                                            std::size_t source_count) {
  const auto dim = static_cast<std::size_t>(variances.size());
  std::vector<double> lower(packed_size(dim), 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    lower[packed_index(i, i)] = variances[static_cast<Eigen::Index>(i)];
  }
  return CovarianceMatrix(dim, std::move(lower), stage, source_count);
}

Eigen::MatrixXd CovarianceMatrix::to_dense() const {
  const auto n = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXd out(n, n);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = lower_[packed_index(i, j)];
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return out;
}

Vector CovarianceMatrix::diagonal_entries() const {
  Vector d(static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < dim_; ++i) d[static_cast<Eigen::Index>(i)] = lower_[packed_index(i, i)];
  return d;
}

Eigen::MatrixXd PrecisionMatrix::factor_dense() const {
  const auto n = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = factor_[packed_index(i, j)];
    }
  }
  return out;
}

void PrecisionMatrix::whiten_in_place(std::span<double> v) const {
  if (v.size() != dim_) {
    throw DimensionError("vector of length " + std::to_string(v.size()) +
                         " does not match precision dimension " + std::to_string(dim_));
  }
  const double* row = factor_.data();
  for (std::size_t i = 0; i < dim_; ++i) {
    double acc = v[i];
    for (std::size_t j = 0; j < i; ++j) acc -= row[j] * v[j];
    v[i] = acc / row[i];
    row += i + 1;
  }
}

Vector PrecisionMatrix::solve(const Vector& v) const {
  Vector y = v;
  whiten_in_place(std::span<double>(y.data(), static_cast<std::size_t>(y.size())));
  // Back substitution with L^T.
  for (std::size_t ii = dim_; ii-- > 0;) {
    double acc = y[static_cast<Eigen::Index>(ii)];
    for (std::size_t k = ii + 1; k < dim_; ++k) {
      acc -= factor_[packed_index(k, ii)] * y[static_cast<Eigen::Index>(k)];
    }
    y[static_cast<Eigen::Index>(ii)] = acc / factor_[packed_index(ii, ii)];
  }
  return y;
}

double PrecisionMatrix::quadratic_form(const Vector& diff) const {
  Vector z = diff;
  whiten_in_place(std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
  return z.squaredNorm();
}

CovarianceMatrix estimate_covariance(const RowMatrix& features, const Vector& mean,
                                     Divisor divisor) {
  const auto n = static_cast<std::size_t>(features.rows());
  const auto dim = static_cast<std::size_t>(features.cols());
  if (static_cast<std::size_t>(mean.size()) != dim) {
    throw DimensionError("mean has length " + std::to_string(mean.size()) +
                         " but features have dimension " + std::to_string(dim));
  }
  if (n == 0) throw InputError("covariance estimation needs at least one row");
  if (divisor == Divisor::kUnbiased && n < 2) {
    throw InputError("unbiased covariance estimation needs at least two rows");
  }
  require_finite(features, "features");
  if (!mean.allFinite()) throw InputError("mean contains a non-finite value");

  const double denom = divisor == Divisor::kPopulation ? static_cast<double>(n)
                                                       : static_cast<double>(n - 1);
  const Eigen::MatrixXd centered = features.rowwise() - mean.transpose();
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                                  static_cast<Eigen::Index>(dim));
  scatter.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / denom);

  std::vector<double> lower(packed_size(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      lower[packed_index(i, j)] = scatter(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return CovarianceMatrix::from_packed(dim, std::move(lower), Stage::kRaw, n);
}

CovarianceMatrix shrink(const CovarianceMatrix& cov, double gamma1, double gamma2) {
  require_stage(cov, Stage::kRaw, "shrink");
  require_gamma(gamma1, "gamma1");
  require_gamma(gamma2, "gamma2");
  const std::size_t dim = cov.dim();
  const auto packed = cov.packed();

  double diag_sum = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < i; ++j) total += 2.0 * packed[packed_index(i, j)];
    diag_sum += packed[packed_index(i, i)];
  }
  const double v1 = dim == 0 ? 0.0 : diag_sum / static_cast<double>(dim);
  const double v2 = dim < 2 ? 0.0 : total / static_cast<double>(dim * (dim - 1));
  if (gamma1 > 0.0 && !(v1 > 0.0)) {
    throw ConditioningError(
        "cannot shrink a covariance with zero mean variance (V1 = " + std::to_string(v1) +
            "); the class has no spread",
        dim);
  }

  std::vector<double> lower(packed.begin(), packed.end());
  const double diag_shift = gamma1 * v1;
  const double off_shift = gamma2 * v2;
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < i; ++j) lower[packed_index(i, j)] += off_shift;
    lower[packed_index(i, i)] += diag_shift;
  }
  return CovarianceMatrix::from_packed(dim, std::move(lower), Stage::kShrunk, cov.source_count());
}

CovarianceMatrix normalize_correlation(const CovarianceMatrix& cov) {
  require_stage(cov, Stage::kShrunk, "normalize_correlation");
  const std::size_t dim = cov.dim();
  std::vector<double> sigma(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double v = cov(i, i);
    if (!(v > 0.0)) {
      throw ConditioningError("correlation normalization needs positive variances; dimension " +
                                  std::to_string(i) + " has variance " + std::to_string(v),
                              i);
    }
    sigma[i] = std::sqrt(v);
  }
  std::vector<double> lower(packed_size(dim));
  const auto packed = cov.packed();
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      lower[packed_index(i, j)] = packed[packed_index(i, j)] / (sigma[i] * sigma[j]);
    }
    lower[packed_index(i, i)] = 1.0;
  }
  return CovarianceMatrix::from_packed(dim, std::move(lower), Stage::kNormalized,
                                       cov.source_count());
}

PrecisionMatrix invert_spd(const CovarianceMatrix& cov) {
  if (cov.stage() == Stage::kRaw) {
    throw StageError("invert_spd expects a shrunk or normalized covariance, got raw");
  }
  const std::size_t dim = cov.dim();
  const auto n = static_cast<Eigen::Index>(dim);
  const Eigen::LLT<Eigen::MatrixXd> llt(cov.to_dense());
  if (llt.info() != Eigen::Success) {
    throw FactorizationError(
        "covariance is not positive definite; apply shrinkage (gamma1 > 0) before inversion");
  }
  const Eigen::MatrixXd lower = llt.matrixL();

  PrecisionMatrix out;
  out.dim_ = dim;
  out.factor_.resize(packed_size(dim));
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pivot = lower(i, i);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      throw FactorizationError(
          "covariance is not positive definite; apply shrinkage (gamma1 > 0) before inversion");
    }
    for (Eigen::Index j = 0; j <= i; ++j) {
      out.factor_[packed_index(static_cast<std::size_t>(i), static_cast<std::size_t>(j))] =
          lower(i, j);
    }
    log_det += 2.0 * std::log(pivot);
  }
  out.log_det_ = log_det;

  Eigen::MatrixXd inverse_factor = Eigen::MatrixXd::Identity(n, n);
  lower.triangularView<Eigen::Lower>().solveInPlace(inverse_factor);
  out.screening_ = inverse_factor.transpose().cast<float>();
  return out;
}

DiagonalModel normalize_diagonal(const CovarianceMatrix& cov) {
  require_stage(cov, Stage::kShrunk, "normalize_diagonal");
  Vector diag = cov.diagonal_entries();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (diag[i] < 0.0) {
      throw ConditioningError("variance of dimension " + std::to_string(i) + " is negative",
                              static_cast<std::size_t>(i));
    }
  }
  const double norm = diag.norm();
  if (!(norm > 0.0)) {
    throw ConditioningError("diagonal normalization needs a nonzero variance vector", cov.dim());
  }
  return DiagonalModel{diag / norm, norm};
}

CovarianceMatrix merge_common(const CovarianceMatrix& prev, std::size_t n_classes_prev,
                              const CovarianceMatrix& task, std::size_t n_classes_total) {
  require_stage(task, Stage::kRaw, "merge_common");
  if (n_classes_prev == 0) return task;
  require_stage(prev, Stage::kRaw, "merge_common");
  require_same_dim(prev, task, "merge_common");
  if (n_classes_total <= n_classes_prev) {
    throw InputError("merge_common: class count must grow (previous " +
                     std::to_string(n_classes_prev) + ", total " +
                     std::to_string(n_classes_total) + ")");
  }
  const double total = static_cast<double>(n_classes_total);
  const double w_prev = static_cast<double>(n_classes_prev) / total;
  const double w_task = static_cast<double>(n_classes_total - n_classes_prev) / total;
  const auto a = prev.packed();
  const auto b = task.packed();
  std::vector<double> lower(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) lower[k] = a[k] * w_prev + b[k] * w_task;
  return CovarianceMatrix::from_packed(prev.dim(), std::move(lower), Stage::kRaw,
                                       prev.source_count() + task.source_count());
}

CovarianceMatrix average_domain(const CovarianceMatrix& prev, const CovarianceMatrix& curr) {
  require_same_dim(prev, curr, "average_domain");
  if (prev.stage() != curr.stage()) {
    throw StageError("average_domain: stage mismatch (" + std::string(to_string(prev.stage())) +
                     " vs " + std::string(to_string(curr.stage())) + ")");
  }
  require_stage(prev, Stage::kRaw, "average_domain");
  const auto a = prev.packed();
  const auto b = curr.packed();
  std::vector<double> lower(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) lower[k] = 0.5 * (a[k] + b[k]);
  return CovarianceMatrix::from_packed(prev.dim(), std::move(lower), Stage::kRaw,
                                       prev.source_count() + curr.source_count());
}

}  // namespace fecam
