#include "fecam/transform.hpp"

#include "fecam/error.hpp"

#include <cmath>
#include <string>

namespace fecam {
namespace {

bool is_identity(const TukeyConfig& config) {
  if (config.enabled && !std::isfinite(config.lambda)) {
    throw InputError("tukey lambda must be finite");
  }
  return !config.enabled || config.lambda == 1.0;
}

double apply(double x, double lambda) {
  if (lambda == 0.0) return std::log(x);
  if (x == 0.0) return 0.0;
  return std::pow(x, lambda);
}

void check_entry(double x, double lambda, Eigen::Index row, Eigen::Index col) {
  if (!std::isfinite(x)) {
    throw InputError("tukey input is non-finite at row " + std::to_string(row) + ", column " +
                     std::to_string(col));
  }
  if (lambda == 0.0 && !(x > 0.0)) {
    throw InputError("tukey log branch (lambda = 0) needs positive input; got " +
                     std::to_string(x) + " at row " + std::to_string(row) + ", column " +
                     std::to_string(col));
  }
  if (x < 0.0) {
    throw InputError("tukey transform with lambda = " + std::to_string(lambda) +
                     " got negative input " + std::to_string(x) + " at row " +
                     std::to_string(row) + ", column " + std::to_string(col) +
                     "; disable the transform or use the bypass policy");
  }
}

}  // namespace

std::string_view to_string(NegativePolicy policy) {
  return policy == NegativePolicy::kBypass ? "bypass" : "error";
}

bool tukey_domain_violation(const RowMatrix& features, const TukeyConfig& config) {
  if (is_identity(config)) return false;
  if (config.lambda == 0.0) return (features.array() <= 0.0).any();
  return (features.array() < 0.0).any();
}

TukeyResult tukey(const RowMatrix& features, const TukeyConfig& config) {
  if (is_identity(config)) return {features, false};
  // The log branch has no sensible bypass: a nonpositive entry is always an error.
  if (config.lambda != 0.0 && config.negative_policy == NegativePolicy::kBypass &&
      tukey_domain_violation(features, config)) {
    return {features, true};
  }
  RowMatrix out(features.rows(), features.cols());
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      const double x = features(r, c);
      check_entry(x, config.lambda, r, c);
      out(r, c) = apply(x, config.lambda);
    }
  }
  return {std::move(out), false};
}

Vector tukey_vector(const Vector& values, const TukeyConfig& config) {
  if (is_identity(config)) return values;
  Vector out(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    check_entry(values[i], config.lambda, 0, i);
    out[i] = apply(values[i], config.lambda);
  }
  return out;
}

}  // namespace fecam
