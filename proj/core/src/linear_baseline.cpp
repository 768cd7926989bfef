#include "fecam/linear_baseline.hpp"

#include "fecam/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace fecam {
namespace {

Eigen::MatrixXd sampling_factor(const CovarianceMatrix& cov, const SamplingOptions& options) {
  const Eigen::MatrixXd dense = cov.to_dense();
  const Eigen::LLT<Eigen::MatrixXd> llt(dense);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  if (options.require_positive_definite) {
    throw FactorizationError(
        "covariance is not positive definite and cannot be sampled; increase shrinkage");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
  const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal();
}

RowMatrix scores(const LinearClassifier& clf, const RowMatrix& x) {
  RowMatrix s = x * clf.weights.transpose();
  s.rowwise() += clf.biases.transpose();
  return s;
}

}  // namespace

RowMatrix sample_gaussian(const Vector& mean, const CovarianceMatrix& cov, std::size_t k,
                          std::uint64_t seed, std::uint32_t stream, const SamplingOptions& options) {
  if (static_cast<std::size_t>(mean.size()) != cov.dim()) {
    throw DimensionError("sample_gaussian: mean of length " + std::to_string(mean.size()) +
                         " vs covariance dimension " + std::to_string(cov.dim()));
  }
  const Eigen::MatrixXd factor = sampling_factor(cov, options);
  const auto dim = mean.size();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream};
  std::mt19937_64 engine(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix out(static_cast<Eigen::Index>(k), dim);
  Vector z(dim);
  for (Eigen::Index s = 0; s < out.rows(); ++s) {
    for (Eigen::Index d = 0; d < dim; ++d) z[d] = normal(engine);
    out.row(s) = (mean + factor * z).transpose();
  }
  return out;
}

FeatureMatrix sample_from_gaussians(const FeCAMModel& model, std::size_t samples_per_class,
                                    std::uint64_t seed, const SamplingOptions& options) {
  if (model.config().mode != CovarianceMode::kPerClass) {
    throw InputError("sampling needs a per_class model");
  }
  if (model.empty()) throw InputError("sampling needs at least one class");
  const auto k = static_cast<Eigen::Index>(samples_per_class);
  FeatureMatrix out;
  out.values.resize(k * static_cast<Eigen::Index>(model.class_count()),
                    static_cast<Eigen::Index>(model.dim()));
  out.labels.reserve(static_cast<std::size_t>(out.values.rows()));

  std::uint32_t stream = 0;
  for (const auto& [id, c] : model.classes()) {
    out.values.middleRows(stream * k, k) = sample_gaussian(
        c->prototype_scored, model.shrunk_covariance(id), samples_per_class, seed, stream, options);
    out.labels.insert(out.labels.end(), samples_per_class, id);
    ++stream;
  }
  return out;
}

LossGradient softmax_cross_entropy(const Eigen::MatrixXd& weights, const Vector& biases,
                                   const RowMatrix& features,
                                   std::span<const std::size_t> targets) {
  const auto n = features.rows();
  if (static_cast<std::size_t>(n) != targets.size()) {
    throw DimensionError("softmax_cross_entropy: rows and targets differ in length");
  }
  if (weights.cols() != features.cols() || biases.size() != weights.rows()) {
    throw DimensionError("softmax_cross_entropy: parameter shapes do not match the features");
  }
  RowMatrix logits = features * weights.transpose();
  logits.rowwise() += biases.transpose();

  LossGradient out;
  RowMatrix residual(n, weights.rows());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const double peak = logits.row(r).maxCoeff();
    const auto shifted = (logits.row(r).array() - peak).eval();
    const double log_norm = std::log(shifted.exp().sum());
    const auto t = static_cast<Eigen::Index>(targets[static_cast<std::size_t>(r)]);
    loss += log_norm - shifted[t];
    residual.row(r) = (shifted - log_norm).exp();
    residual(r, t) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss = loss * inv_n;
  out.weights = residual.transpose() * features * inv_n;
  out.biases = residual.colwise().sum().transpose() * inv_n;
  return out;
}

LinearClassifier train_linear(const RowMatrix& features, std::span<const ClassId> labels,
                              const TrainOptions& options) {
  if (labels.size() != static_cast<std::size_t>(features.rows())) {
    throw DimensionError("train_linear: " + std::to_string(features.rows()) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  require_finite(features, "training features");
  if (!(options.learning_rate > 0.0)) throw InputError("learning rate must be positive");

  LinearClassifier clf;
  clf.classes.assign(labels.begin(), labels.end());
  std::sort(clf.classes.begin(), clf.classes.end());
  clf.classes.erase(std::unique(clf.classes.begin(), clf.classes.end()), clf.classes.end());
  if (clf.classes.size() < 2) throw InputError("train_linear needs at least two classes");
  clf.seed = options.seed;

  std::vector<std::size_t> targets(labels.size());
  std::vector<std::size_t> per_class(clf.classes.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    targets[i] = static_cast<std::size_t>(
        std::lower_bound(clf.classes.begin(), clf.classes.end(), labels[i]) - clf.classes.begin());
    ++per_class[targets[i]];
  }
  const auto [lo, hi] = std::minmax_element(per_class.begin(), per_class.end());
  clf.trained_on = *lo == *hi ? *lo : 0;

  const auto classes = static_cast<Eigen::Index>(clf.classes.size());
  std::mt19937_64 engine(options.seed);
  std::normal_distribution<double> normal(0.0, 0.01);
  clf.weights.resize(classes, features.cols());
  for (Eigen::Index i = 0; i < clf.weights.size(); ++i) clf.weights.data()[i] = normal(engine);
  clf.biases = Vector::Zero(classes);

  LossGradient current = softmax_cross_entropy(clf.weights, clf.biases, features, targets);
  if (!std::isfinite(current.loss)) throw Error("linear classifier loss is not finite");
  clf.loss_history.push_back(current.loss);

  double rate = options.learning_rate;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    bool accepted = false;
    for (std::size_t attempt = 0; attempt <= options.max_halvings; ++attempt) {
      Eigen::MatrixXd w = clf.weights - rate * current.weights;
      Vector b = clf.biases - rate * current.biases;
      LossGradient next = softmax_cross_entropy(w, b, features, targets);
      if (std::isfinite(next.loss) && next.loss <= current.loss + options.monotone_tolerance) {
        clf.weights = std::move(w);
        clf.biases = std::move(b);
        current = std::move(next);
        accepted = true;
        break;
      }
      rate *= 0.5;
    }
    if (!accepted) {
      if (!std::isfinite(current.loss)) throw Error("linear classifier training diverged");
      break;  // no descent step left at any tried rate
    }
    clf.loss_history.push_back(current.loss);
  }
  return clf;
}

std::vector<ClassId> predict_linear(const LinearClassifier& classifier, const RowMatrix& queries) {
  if (queries.cols() != classifier.weights.cols()) {
    throw DimensionError("queries have dimension " + std::to_string(queries.cols()) +
                         " but the classifier expects " + std::to_string(classifier.weights.cols()));
  }
  const RowMatrix s = scores(classifier, queries);
  std::vector<ClassId> out(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index y = 1; y < s.cols(); ++y) {
      if (s(r, y) > s(r, best)) best = y;
    }
    out[static_cast<std::size_t>(r)] = classifier.classes[static_cast<std::size_t>(best)];
  }
  return out;
}

}  // namespace fecam
