#pragma once

#include "fecam/classifier.hpp"
#include "fecam/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fecam {

/// Multinomial logistic regression over a fixed set of class ids.
/// Row y of `weights` scores class `classes[y]`.
struct LinearClassifier {
  std::vector<ClassId> classes;  // ascending
  Eigen::MatrixXd weights;       // Y x D
  Vector biases;                 // Y
  std::size_t trained_on = 0;    // samples per class, when known
  std::uint64_t seed = 0;
  std::vector<double> loss_history;  // loss before training, then after each epoch
};

struct SamplingOptions {
  // When false, a semidefinite covariance is factored through its
  // eigendecomposition instead of failing. Negative eigenvalues are zeroed.
  bool require_positive_definite = true;
};

/// k draws from N(mean, cov) through a factor of `cov`. `stream` selects an
/// independent random sequence for the same seed.
RowMatrix sample_gaussian(const Vector& mean, const CovarianceMatrix& cov, std::size_t k,
                          std::uint64_t seed, std::uint32_t stream = 0,
                          const SamplingOptions& options = {});

/// Draws k samples per class from N(prototype_scored, shrunk covariance).
/// The model must be in per_class mode. Reproducible for a given seed.
FeatureMatrix sample_from_gaussians(const FeCAMModel& model, std::size_t samples_per_class,
                                    std::uint64_t seed, const SamplingOptions& options = {});

struct TrainOptions {
  std::size_t epochs = 500;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  // A step that raises the loss by more than this is retried at half the rate.
  double monotone_tolerance = 1e-6;
  std::size_t max_halvings = 40;
};

/// Mean softmax cross-entropy and its gradient.
struct LossGradient {
  double loss = 0.0;
  Eigen::MatrixXd weights;
  Vector biases;
};

/// `targets` are row indices into `weights` (not class ids).
LossGradient softmax_cross_entropy(const Eigen::MatrixXd& weights, const Vector& biases,
                                   const RowMatrix& features, std::span<const std::size_t> targets);

/// Full-batch gradient descent from a small seeded initialization.
LinearClassifier train_linear(const RowMatrix& features, std::span<const ClassId> labels,
                              const TrainOptions& options = {});

/// Argmax of the affine scores; ties go to the smallest class id.
std::vector<ClassId> predict_linear(const LinearClassifier& classifier, const RowMatrix& queries);

}  // namespace fecam
