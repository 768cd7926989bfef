#include "fecam/synth.hpp"

#include "fecam/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>

namespace fecam {
namespace {

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& engine) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(engine);
  }
  return m;
}

// Haar-distributed orthogonal matrix via QR with sign correction.
Eigen::MatrixXd random_rotation(Eigen::Index dim, std::mt19937_64& engine) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(dim, dim, engine));
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR();
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (r(i, i) < 0.0) q.col(i) *= -1.0;
  }
  return q;
}

const ClassShape& shape_for(const SynthSpec& spec, std::size_t c) {
  static const ClassShape kDefault{};
  if (spec.shapes.empty()) return kDefault;
  return spec.shapes.size() == 1 ? spec.shapes[0] : spec.shapes[c];
}

}  // namespace

GaussianParams synth_parameters(const SynthSpec& spec) {
  if (spec.classes == 0) throw InputError("synthetic spec needs at least one class");
  if (spec.dim == 0) throw InputError("synthetic spec needs a positive dimension");
  if (!(spec.mean_spread >= 0.0)) throw InputError("mean spread must be nonnegative");
  if (!spec.shapes.empty() && spec.shapes.size() != 1 && spec.shapes.size() != spec.classes) {
    throw InputError("synthetic spec has " + std::to_string(spec.shapes.size()) +
                     " class shapes for " + std::to_string(spec.classes) + " classes");
  }
  for (const auto& s : spec.shapes) {
    if (!(s.scale > 0.0)) throw InputError("class covariance scale must be positive");
    if (s.shape == CovarianceShape::kAnisotropic && !(s.anisotropy >= 1.0)) {
      throw InputError("anisotropy must be at least 1");
    }
  }

  const auto dim = static_cast<Eigen::Index>(spec.dim);
  std::mt19937_64 engine(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::MatrixXd shared_rotation = random_rotation(dim, engine);

  GaussianParams params;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    params.ids.push_back(static_cast<ClassId>(c));
    Vector mean(dim);
    for (Eigen::Index d = 0; d < dim; ++d) mean[d] = spec.mean_spread * normal(engine);
    params.means.push_back(std::move(mean));

    const ClassShape& s = shape_for(spec, c);
    Eigen::MatrixXd cov;
    switch (s.shape) {
      case CovarianceShape::kIsotropic:
        cov = s.scale * s.scale * Eigen::MatrixXd::Identity(dim, dim);
        break;
      case CovarianceShape::kAnisotropic: {
        Vector variances(dim);
        for (Eigen::Index d = 0; d < dim; ++d) {
          const double t = dim == 1 ? 0.0 : static_cast<double>(d) / static_cast<double>(dim - 1);
          const double stddev = s.scale * std::pow(s.anisotropy, 1.0 - t);
          variances[d] = stddev * stddev;
        }
        const Eigen::MatrixXd rotation =
            spec.shared_orientation ? shared_rotation : random_rotation(dim, engine);
        cov = rotation * variances.asDiagonal() * rotation.transpose();
        cov = 0.5 * (cov + cov.transpose()).eval();
        break;
      }
      case CovarianceShape::kRandomSpd: {
        const Eigen::MatrixXd g = gaussian_matrix(dim, dim, engine);
        cov = s.scale * s.scale *
              (g * g.transpose() / static_cast<double>(dim) +
               0.1 * Eigen::MatrixXd::Identity(dim, dim));
        break;
      }
    }
    params.covariances.push_back(std::move(cov));
  }
  return params;
}

FeatureMatrix synth_draw(const GaussianParams& params, std::size_t rows_per_class,
                         std::uint64_t seed) {
  const auto dim = static_cast<Eigen::Index>(params.dim());
  const auto per_class = static_cast<Eigen::Index>(rows_per_class);
  FeatureMatrix out;
  out.values.resize(per_class * static_cast<Eigen::Index>(params.ids.size()), dim);
  out.labels.reserve(static_cast<std::size_t>(out.values.rows()));
  out.domains.assign(static_cast<std::size_t>(out.values.rows()), 0);

  std::mt19937_64 engine(seed ^ 0x9e3779b97f4a7c15ULL);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < params.ids.size(); ++c) {
    const Eigen::LLT<Eigen::MatrixXd> llt(params.covariances[c]);
    if (llt.info() != Eigen::Success) {
      throw FactorizationError("class " + std::to_string(params.ids[c]) +
                               " covariance is not positive definite");
    }
    const Eigen::MatrixXd factor = llt.matrixL();
    const Eigen::MatrixXd z = gaussian_matrix(dim, per_class, engine);
    const Eigen::MatrixXd samples = (factor * z).colwise() + params.means[c];
    for (Eigen::Index s = 0; s < per_class; ++s, ++row) {
      out.values.row(row) = samples.col(s).transpose();
      out.labels.push_back(params.ids[c]);
    }
  }
  return out;
}

SynthData synth_generate(const SynthSpec& spec) {
  SynthData out;
  out.truth = synth_parameters(spec);
  out.data = synth_draw(out.truth, spec.rows_per_class, spec.seed);
  return out;
}

SynthSpec heterogeneous_spec(std::size_t classes, std::size_t base_classes, std::size_t dim,
                             double anisotropy, std::size_t rows_per_class, std::uint64_t seed) {
  if (base_classes > classes) throw InputError("more base classes than classes");
  SynthSpec spec;
  spec.classes = classes;
  spec.dim = dim;
  spec.mean_spread = 3.0;
  spec.rows_per_class = rows_per_class;
  spec.seed = seed;
  spec.shared_orientation = false;
  spec.shapes.assign(classes, ClassShape{CovarianceShape::kIsotropic, 1.0, 1.0});
  for (std::size_t c = base_classes; c < classes; ++c) {
    spec.shapes[c] = ClassShape{CovarianceShape::kAnisotropic, 1.0, anisotropy};
  }
  return spec;
}

std::vector<OracleDecision> bayes_oracle(const GaussianParams& params, const RowMatrix& queries) {
  const auto dim = static_cast<Eigen::Index>(params.dim());
  if (params.ids.empty()) throw InputError("bayes_oracle needs at least one class");
  if (queries.cols() != dim) {
    throw DimensionError("queries have dimension " + std::to_string(queries.cols()) +
                         " but the parameters have " + std::to_string(dim));
  }
  const std::size_t k = params.ids.size();
  std::vector<Eigen::LLT<Eigen::MatrixXd>> factors;
  std::vector<double> half_log_det(k);
  for (std::size_t c = 0; c < k; ++c) {
    factors.emplace_back(params.covariances[c]);
    if (factors.back().info() != Eigen::Success) {
      throw FactorizationError("true covariance of class " + std::to_string(params.ids[c]) +
                               " is singular");
    }
    const Eigen::MatrixXd l = factors.back().matrixL();
    half_log_det[c] = l.diagonal().array().log().sum();
  }

  std::vector<OracleDecision> out(static_cast<std::size_t>(queries.rows()));
  std::vector<double> log_density(k);
  for (Eigen::Index r = 0; r < queries.rows(); ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      const Vector diff = queries.row(r).transpose() - params.means[c];
      const Vector w = factors[c].matrixL().solve(diff);
      log_density[c] = -0.5 * w.squaredNorm() - half_log_det[c];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (log_density[c] > log_density[best] ||
          (log_density[c] == log_density[best] && params.ids[c] < params.ids[best])) {
        best = c;
      }
    }
    double denom = 0.0;
    double runner_up = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double p = std::exp(log_density[c] - log_density[best]);
      denom += p;
      if (c != best) runner_up = std::max(runner_up, p);
    }
    out[static_cast<std::size_t>(r)] = {params.ids[best], (1.0 - runner_up) / denom};
  }
  return out;
}

std::vector<ClassSpectrum> singular_value_profile(const RowMatrix& features,
                                                  std::span<const ClassId> labels) {
  if (labels.size() != static_cast<std::size_t>(features.rows())) {
    throw DimensionError("singular_value_profile: rows and labels differ in length");
  }
  std::map<ClassId, std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    groups[labels[i]].push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<ClassSpectrum> out;
  for (const auto& [id, rows] : groups) {
    if (rows.size() < 2) {
      throw InputError("class " + std::to_string(id) + " has fewer than two samples");
    }
    RowMatrix block(static_cast<Eigen::Index>(rows.size()), features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      block.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
    }
    const Eigen::RowVectorXd mean = block.colwise().mean();
    block.rowwise() -= mean;
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(block);
    ClassSpectrum s;
    s.id = id;
    s.rows = rows.size();
    s.singular_values = svd.singularValues();
    const double smallest = s.singular_values.minCoeff();
    const double largest = s.singular_values.maxCoeff();
    s.anisotropy = smallest > 0.0 ? largest / smallest : std::numeric_limits<double>::infinity();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fecam
