#pragma once

#include "fecam/covariance.hpp"
#include "fecam/transform.hpp"
#include "fecam/types.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace fecam {

/// How class-conditional covariances are represented.
enum class CovarianceMode : std::uint8_t {
  kPerClass = 0,   // one shrunk, correlation-normalized matrix per class
  kCommon = 1,     // one matrix shared by all seen classes
  kDiagonal = 2,   // per-class variances normalized by their norm
  kEuclidean = 3,  // prototypes only; identity metric
};

/// Whether the scored prototype is the transform of the raw mean, or the
/// mean of the transformed features.
enum class PrototypeOrder : std::uint8_t { kTransformOfMean = 0, kMeanOfTransformed = 1 };

/// kMixed screens per-class distances in single precision and re-scores
/// the near-best candidates in double; kExact scores everything in double.
enum class ScoringPrecision : std::uint8_t { kMixed = 0, kExact = 1 };

std::string_view to_string(CovarianceMode mode);
std::string_view to_string(PrototypeOrder order);
std::string_view to_string(ScoringPrecision precision);

struct ClassifierConfig {
  CovarianceMode mode = CovarianceMode::kPerClass;
  TukeyConfig tukey{};
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  Divisor divisor = Divisor::kPopulation;
  PrototypeOrder prototype_order = PrototypeOrder::kTransformOfMean;
  ScoringPrecision scoring = ScoringPrecision::kMixed;
  // Adds log det of the conditioned covariance to every distance, turning
  // the score into a full Gaussian negative log-likelihood. Diagnostic.
  bool log_det_correction = false;

  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

/// Statistics kept for one class. Raw fields are what gets persisted; the
/// conditioned fields are derived from them when the class is sealed.
struct ClassModel {
  ClassId id = 0;
  std::size_t count = 0;
  Vector prototype_raw;     // mean of untransformed features
  Vector prototype_scored;  // prototype in transformed space, used for scoring

  std::optional<CovarianceMatrix> raw_covariance;  // kPerClass
  Vector raw_variances;                            // kDiagonal

  std::optional<CovarianceMatrix> covariance;  // conditioned matrix (kPerClass)
  std::optional<PrecisionMatrix> precision;    // factor of `covariance`
  std::optional<DiagonalModel> diagonal;       // kDiagonal
};

struct TaskRecord {
  std::size_t task_index = 0;
  std::vector<ClassId> class_ids;
  std::size_t reseen_classes = 0;  // classes updated through the domain path

  friend bool operator==(const TaskRecord&, const TaskRecord&) = default;
};

/// Immutable classifier state. `fit_task` returns a new model that shares
/// unchanged class statistics with its input.
class FeCAMModel {
 public:
  using ClassMap = std::map<ClassId, std::shared_ptr<const ClassModel>>;

  FeCAMModel() = default;
  explicit FeCAMModel(ClassifierConfig config) : config_(config) {}

  const ClassifierConfig& config() const { return config_; }
  std::size_t dim() const { return dim_; }
  std::size_t class_count() const { return classes_.size(); }
  bool empty() const { return classes_.empty(); }
  std::vector<ClassId> class_ids() const;
  const ClassMap& classes() const { return classes_; }
  const ClassModel* find(ClassId id) const;
  const ClassModel& at(ClassId id) const;

  /// Raw merged covariance over all seen classes (kCommon only).
  const std::optional<CovarianceMatrix>& common_covariance() const { return common_raw_; }
  std::size_t common_class_count() const { return common_classes_; }
  const std::optional<PrecisionMatrix>& common_precision() const { return common_precision_; }

  const std::vector<TaskRecord>& task_log() const { return task_log_; }

  /// True when the first task carried negative features and the transform
  /// was skipped under NegativePolicy::kBypass.
  bool tukey_bypassed() const { return tukey_bypassed_; }

  /// True for models built from known Gaussian parameters; their
  /// covariances are used as given, without shrinkage or normalization.
  bool injected() const { return injected_; }

  /// Tukey settings actually applied to features and queries.
  TukeyConfig effective_tukey() const;

  /// The shrunk (pre-normalization) covariance of a class, kPerClass only.
  CovarianceMatrix shrunk_covariance(ClassId id) const;

  /// Builds a sealed model from known means and covariances. Means are
  /// taken to live in the scoring space (no transform is applied to them).
  static FeCAMModel from_gaussians(ClassifierConfig config, std::span<const ClassId> ids,
                                   std::span<const Vector> means,
                                   std::span<const Eigen::MatrixXd> covariances);

  /// Reassembles a model from persisted raw statistics and seals it.
  struct RawState {
    ClassifierConfig config;
    std::size_t dim = 0;
    std::vector<ClassModel> classes;  // raw fields only
    std::optional<CovarianceMatrix> common_raw;
    std::size_t common_classes = 0;
    std::vector<TaskRecord> task_log;
    bool tukey_bypassed = false;
    bool injected = false;
  };
  static FeCAMModel restore(RawState state);

 private:
  friend FeCAMModel fit_task(const FeCAMModel& model, const RowMatrix& features,
                             std::span<const ClassId> labels);

  void seal_common();

  ClassifierConfig config_{};
  std::size_t dim_ = 0;
  ClassMap classes_;
  std::optional<CovarianceMatrix> common_raw_;
  std::size_t common_classes_ = 0;
  std::optional<PrecisionMatrix> common_precision_;
  std::vector<TaskRecord> task_log_;
  bool tukey_bypassed_ = false;
  bool injected_ = false;
};

/// Fits one task: prototypes from raw features, covariances from
/// transformed features, then conditioning per the model's mode. Classes
/// already present are updated through the domain-incremental path
/// (count-weighted prototype, averaged covariance). The input is unchanged.
FeCAMModel fit_task(const FeCAMModel& model, const RowMatrix& features,
                    std::span<const ClassId> labels);

struct ClassDistance {
  ClassId id = 0;
  double distance = 0.0;
};

struct Prediction {
  ClassId label = 0;
  double margin = 0.0;  // runner-up distance minus best; +inf with one class
  std::vector<ClassDistance> distances;  // ascending class id

  double distance_to(ClassId id) const;
};

struct PredictOptions {
  std::size_t threads = 0;  // 0: FECAM_THREADS, then hardware concurrency
};

/// (x - proto)^T Sigma^{-1} (x - proto) via a triangular solve.
double squared_mahalanobis(const Vector& x, const Vector& proto, const PrecisionMatrix& precision);

/// Nearest prototype under the model's metric. Queries are transformed
/// with the model's Tukey settings first. Ties go to the smallest class id.
std::vector<Prediction> predict(const FeCAMModel& model, const RowMatrix& queries,
                                const PredictOptions& options = {});

/// Nearest prototype under the squared Euclidean distance.
std::vector<Prediction> predict_euclidean(const FeCAMModel& model, const RowMatrix& queries,
                                          const PredictOptions& options = {});

std::vector<ClassId> labels_of(std::span<const Prediction> predictions);

/// Fraction of predictions equal to `truth`. Empty input gives 0.
double accuracy(std::span<const ClassId> predicted, std::span<const ClassId> truth);

/// Bytes needed to store the model in single precision, with covariances
/// kept as lower triangles.
struct StorageReport {
  std::uint64_t prototype_bytes = 0;
  std::uint64_t covariance_bytes = 0;

  std::uint64_t total() const { return prototype_bytes + covariance_bytes; }
};

StorageReport model_storage_report(const FeCAMModel& model);

}  // namespace fecam
