#pragma once

#include "fecam/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fecam {

/// Shape of one synthetic class covariance.
enum class CovarianceShape : std::uint8_t {
  kIsotropic = 0,    // scale^2 * I
  kAnisotropic = 1,  // rotated, standard deviations spread geometrically over [scale, a * scale]
  kRandomSpd = 2,    // scale^2 * (G G^T / D + 0.1 I), G standard normal
};

struct ClassShape {
  CovarianceShape shape = CovarianceShape::kIsotropic;
  double scale = 1.0;
  double anisotropy = 1.0;
};

struct SynthSpec {
  std::size_t classes = 20;
  std::size_t dim = 16;
  double mean_spread = 3.0;       // class means ~ N(0, mean_spread^2 I)
  std::vector<ClassShape> shapes; // one per class, or a single shape for all; empty = isotropic
  std::size_t rows_per_class = 500;
  std::uint64_t seed = 0;
  bool shared_orientation = false;  // anisotropic classes share one rotation
};

/// Known class-conditional Gaussians, indexed in parallel.
struct GaussianParams {
  std::vector<ClassId> ids;
  std::vector<Vector> means;
  std::vector<Eigen::MatrixXd> covariances;

  std::size_t dim() const { return means.empty() ? 0 : static_cast<std::size_t>(means[0].size()); }
};

struct SynthData {
  FeatureMatrix data;
  GaussianParams truth;
};

/// Draws the class parameters for a spec. Deterministic in spec.seed.
GaussianParams synth_parameters(const SynthSpec& spec);

/// Draws rows_per_class samples from each class, grouped by class.
FeatureMatrix synth_draw(const GaussianParams& params, std::size_t rows_per_class,
                         std::uint64_t seed);

/// synth_parameters followed by synth_draw with the same seed.
SynthData synth_generate(const SynthSpec& spec);

/// Heterogeneous stream used by the desk-scale checks: `base_classes`
/// isotropic classes with unit scale, followed by inflated anisotropic
/// classes, each with its own random orientation.
SynthSpec heterogeneous_spec(std::size_t classes, std::size_t base_classes, std::size_t dim,
                             double anisotropy, std::size_t rows_per_class, std::uint64_t seed);

struct OracleDecision {
  ClassId label = 0;
  double posterior_margin = 0.0;  // best minus runner-up posterior probability
};

/// Exact Gaussian maximum a-posteriori labels with equal priors (log
/// densities include the log-determinant term). Ties go to the smallest id.
std::vector<OracleDecision> bayes_oracle(const GaussianParams& params, const RowMatrix& queries);

struct ClassSpectrum {
  ClassId id = 0;
  std::size_t rows = 0;
  Vector singular_values;  // of the centered rows, descending
  double anisotropy = 0.0; // largest / smallest singular value (inf if the smallest is 0)
};

/// Per-class singular values of the centered features, ascending class id.
std::vector<ClassSpectrum> singular_value_profile(const RowMatrix& features,
                                                  std::span<const ClassId> labels);

}  // namespace fecam
