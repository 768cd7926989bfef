#include "fecam/classifier.hpp"

#include "fecam/error.hpp"
#include "fecam/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace fecam {
namespace {

// Rows per work item in the batched distance kernels.
constexpr Eigen::Index kQueryChunk = 256;
// Column block of the triangular screening product.
constexpr Eigen::Index kColumnBlock = 64;
// Candidates whose screened distance is within this relative window of the
// screened minimum are re-scored in double precision.
constexpr double kScreeningWindow = 1e-2;
constexpr double kScreeningFloor = 1e-12;

using DistanceMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Fn>
decltype(auto) with_class_context(ClassId id, Fn&& fn) {
  const std::string prefix = "class " + std::to_string(id) + ": ";
  try {
    return fn();
  } catch (const ConditioningError& e) {
    throw ConditioningError(prefix + e.what(), e.dimension());
  } catch (const FactorizationError& e) {
    throw FactorizationError(prefix + e.what());
  } catch (const InputError& e) {
    throw InputError(prefix + e.what());
  }
}

void seal_class(ClassModel& c, const ClassifierConfig& config, bool injected) {
  with_class_context(c.id, [&] {
    switch (config.mode) {
      case CovarianceMode::kPerClass: {
        if (!c.raw_covariance) throw InputError("missing covariance");
        if (injected) {
          c.covariance = shrink(*c.raw_covariance, 0.0, 0.0);
        } else {
          c.covariance =
              normalize_correlation(shrink(*c.raw_covariance, config.gamma1, config.gamma2));
        }
        c.precision = invert_spd(*c.covariance);
        break;
      }
      case CovarianceMode::kDiagonal: {
        if (injected) {
          c.diagonal = DiagonalModel{c.raw_variances, 1.0};
        } else {
          const auto shrunk =
              shrink(CovarianceMatrix::diagonal(c.raw_variances), config.gamma1, config.gamma2);
          c.diagonal = normalize_diagonal(shrunk);
        }
        for (Eigen::Index i = 0; i < c.diagonal->variances.size(); ++i) {
          if (!(c.diagonal->variances[i] > 0.0)) {
            throw ConditioningError("diagonal scoring needs positive variances; dimension " +
                                        std::to_string(i) + " is " +
                                        std::to_string(c.diagonal->variances[i]),
                                    static_cast<std::size_t>(i));
          }
        }
        break;
      }
      case CovarianceMode::kCommon:
      case CovarianceMode::kEuclidean:
        break;
    }
  });
}

Vector column_variances(const RowMatrix& rows, const Vector& mean, Divisor divisor) {
  const auto n = rows.rows();
  if (divisor == Divisor::kUnbiased && n < 2) {
    throw InputError("unbiased variance estimation needs at least two rows");
  }
  const double denom = divisor == Divisor::kPopulation ? static_cast<double>(n)
                                                       : static_cast<double>(n - 1);
  return (rows.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() / denom;
}

struct FittedClass {
  ClassId id = 0;
  std::size_t count = 0;
  Vector mean_raw;
  Vector mean_transformed;
  std::optional<CovarianceMatrix> covariance;
  Vector variances;
};

RowMatrix gather(const RowMatrix& source, const std::vector<Eigen::Index>& rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = source.row(rows[i]);
  }
  return out;
}

std::vector<const ClassModel*> ordered_classes(const FeCAMModel& model) {
  std::vector<const ClassModel*> out;
  out.reserve(model.class_count());
  for (const auto& [id, c] : model.classes()) out.push_back(c.get());
  return out;
}

RowMatrix prepare_queries(const FeCAMModel& model, const RowMatrix& queries) {
  if (model.empty()) throw InputError("cannot predict with a model that has no classes");
  if (static_cast<std::size_t>(queries.cols()) != model.dim()) {
    throw DimensionError("queries have dimension " + std::to_string(queries.cols()) +
                         " but the model expects " + std::to_string(model.dim()));
  }
  require_finite(queries, "queries");
  TukeyConfig tukey_config = model.effective_tukey();
  tukey_config.negative_policy = NegativePolicy::kError;
  return tukey(queries, tukey_config).values;
}

std::vector<Prediction> finalize(const DistanceMatrix& distances,
                                 const std::vector<const ClassModel*>& classes) {
  const auto m = distances.rows();
  const auto k = distances.cols();
  std::vector<Prediction> out(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < m; ++r) {
    Prediction& p = out[static_cast<std::size_t>(r)];
    p.distances.resize(static_cast<std::size_t>(k));
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    double second_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index y = 0; y < k; ++y) {
      const double d = distances(r, y);
      p.distances[static_cast<std::size_t>(y)] = {classes[static_cast<std::size_t>(y)]->id, d};
      if (d < best_d) {
        second_d = best_d;
        best_d = d;
        best = y;
      } else if (d < second_d) {
        second_d = d;
      }
    }
    p.label = classes[static_cast<std::size_t>(best)]->id;
    p.margin = second_d - best_d;
  }
  return out;
}

std::size_t chunk_count(Eigen::Index rows) {
  return static_cast<std::size_t>((rows + kQueryChunk - 1) / kQueryChunk);
}

void euclidean_distances(const RowMatrix& q, const std::vector<const ClassModel*>& classes,
                         DistanceMatrix& out, std::size_t threads) {
  parallel_for(chunk_count(q.rows()), threads, [&](std::size_t chunk) {
    const Eigen::Index begin = static_cast<Eigen::Index>(chunk) * kQueryChunk;
    const Eigen::Index rows = std::min(kQueryChunk, q.rows() - begin);
    for (std::size_t y = 0; y < classes.size(); ++y) {
      const Vector& mu = classes[y]->prototype_scored;
      for (Eigen::Index r = begin; r < begin + rows; ++r) {
        out(r, static_cast<Eigen::Index>(y)) = (q.row(r).transpose() - mu).squaredNorm();
      }
    }
  });
}

void diagonal_distances(const RowMatrix& q, const std::vector<const ClassModel*>& classes,
                        bool log_det, DistanceMatrix& out, std::size_t threads) {
  parallel_for(chunk_count(q.rows()), threads, [&](std::size_t chunk) {
    const Eigen::Index begin = static_cast<Eigen::Index>(chunk) * kQueryChunk;
    const Eigen::Index rows = std::min(kQueryChunk, q.rows() - begin);
    for (std::size_t y = 0; y < classes.size(); ++y) {
      const Vector& mu = classes[y]->prototype_scored;
      const Vector inv = classes[y]->diagonal->variances.cwiseInverse();
      const double offset =
          log_det ? classes[y]->diagonal->variances.array().log().sum() : 0.0;
      for (Eigen::Index r = begin; r < begin + rows; ++r) {
        out(r, static_cast<Eigen::Index>(y)) =
            (q.row(r).transpose() - mu).array().square().matrix().dot(inv) + offset;
      }
    }
  });
}

void common_distances(const RowMatrix& q, const std::vector<const ClassModel*>& classes,
                      const PrecisionMatrix& precision, bool log_det, DistanceMatrix& out,
                      std::size_t threads) {
  const Eigen::MatrixXd lower = precision.factor_dense();
  const auto lower_view = lower.triangularView<Eigen::Lower>();
  Eigen::MatrixXd centers(q.cols(), static_cast<Eigen::Index>(classes.size()));
  for (std::size_t y = 0; y < classes.size(); ++y) {
    centers.col(static_cast<Eigen::Index>(y)) = classes[y]->prototype_scored;
  }
  lower_view.solveInPlace(centers);
  const double offset = log_det ? precision.log_det() : 0.0;

  parallel_for(chunk_count(q.rows()), threads, [&](std::size_t chunk) {
    const Eigen::Index begin = static_cast<Eigen::Index>(chunk) * kQueryChunk;
    const Eigen::Index rows = std::min(kQueryChunk, q.rows() - begin);
    Eigen::MatrixXd whitened = q.middleRows(begin, rows).transpose();
    lower_view.solveInPlace(whitened);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index y = 0; y < centers.cols(); ++y) {
        out(begin + r, y) = (whitened.col(r) - centers.col(y)).squaredNorm() + offset;
      }
    }
  });
}

void per_class_exact(const RowMatrix& q, const std::vector<const ClassModel*>& classes,
                     bool log_det, DistanceMatrix& out, std::size_t threads) {
  parallel_for(chunk_count(q.rows()), threads, [&](std::size_t chunk) {
    const Eigen::Index begin = static_cast<Eigen::Index>(chunk) * kQueryChunk;
    const Eigen::Index rows = std::min(kQueryChunk, q.rows() - begin);
    for (std::size_t y = 0; y < classes.size(); ++y) {
      const ClassModel& c = *classes[y];
      const double offset = log_det ? c.precision->log_det() : 0.0;
      for (Eigen::Index r = begin; r < begin + rows; ++r) {
        out(r, static_cast<Eigen::Index>(y)) =
            c.precision->quadratic_form(q.row(r).transpose() - c.prototype_scored) + offset;
      }
    }
  });
}

// Screens every (query, class) pair with a single-precision triangular
// product, then recomputes in double every class that falls inside the
// screening window of the per-query minimum.
void per_class_mixed(const RowMatrix& q, const std::vector<const ClassModel*>& classes,
                     bool log_det, DistanceMatrix& out, std::size_t threads) {
  const Eigen::Index dim = q.cols();
  parallel_for(chunk_count(q.rows()), threads, [&](std::size_t chunk) {
    const Eigen::Index begin = static_cast<Eigen::Index>(chunk) * kQueryChunk;
    const Eigen::Index rows = std::min(kQueryChunk, q.rows() - begin);
    const auto block = q.middleRows(begin, rows);
    FloatMatrix diff(rows, dim);
    FloatMatrix whitened(rows, dim);

    for (std::size_t y = 0; y < classes.size(); ++y) {
      const ClassModel& c = *classes[y];
      const Eigen::MatrixXf& transform = c.precision->screening_transform();
      diff = (block.rowwise() - c.prototype_scored.transpose()).cast<float>();
      for (Eigen::Index j = 0; j < dim; j += kColumnBlock) {
        const Eigen::Index width = std::min(kColumnBlock, dim - j);
        const Eigen::Index depth = j + width;
        whitened.middleCols(j, width).noalias() =
            diff.leftCols(depth) * transform.block(0, j, depth, width);
      }
      const double offset = log_det ? c.precision->log_det() : 0.0;
      for (Eigen::Index r = 0; r < rows; ++r) {
        out(begin + r, static_cast<Eigen::Index>(y)) =
            static_cast<double>(whitened.row(r).squaredNorm()) + offset;
      }
    }

    for (Eigen::Index r = begin; r < begin + rows; ++r) {
      const double screened_min = out.row(r).minCoeff();
      const double limit =
          screened_min + kScreeningWindow * std::abs(screened_min) + kScreeningFloor;
      for (std::size_t y = 0; y < classes.size(); ++y) {
        const auto col = static_cast<Eigen::Index>(y);
        if (out(r, col) <= limit) {
          const ClassModel& c = *classes[y];
          const double offset = log_det ? c.precision->log_det() : 0.0;
          out(r, col) =
              c.precision->quadratic_form(q.row(r).transpose() - c.prototype_scored) + offset;
        }
      }
    }
  });
}

}  // namespace

std::string_view to_string(CovarianceMode mode) {
  switch (mode) {
    case CovarianceMode::kPerClass:
      return "per_class";
    case CovarianceMode::kCommon:
      return "common";
    case CovarianceMode::kDiagonal:
      return "diagonal";
    case CovarianceMode::kEuclidean:
      return "euclidean";
  }
  return "unknown";
}

std::string_view to_string(PrototypeOrder order) {
  return order == PrototypeOrder::kTransformOfMean ? "transform_of_mean" : "mean_of_transformed";
}

std::string_view to_string(ScoringPrecision precision) {
  return precision == ScoringPrecision::kMixed ? "mixed" : "exact";
}

std::vector<ClassId> FeCAMModel::class_ids() const {
  std::vector<ClassId> ids;
  ids.reserve(classes_.size());
  for (const auto& [id, c] : classes_) ids.push_back(id);
  return ids;
}

const ClassModel* FeCAMModel::find(ClassId id) const {
  const auto it = classes_.find(id);
  return it == classes_.end() ? nullptr : it->second.get();
}

const ClassModel& FeCAMModel::at(ClassId id) const {
  const ClassModel* c = find(id);
  if (c == nullptr) throw InputError("model has no class " + std::to_string(id));
  return *c;
}

TukeyConfig FeCAMModel::effective_tukey() const {
  TukeyConfig out = config_.tukey;
  if (tukey_bypassed_) out.enabled = false;
  return out;
}

CovarianceMatrix FeCAMModel::shrunk_covariance(ClassId id) const {
  if (config_.mode != CovarianceMode::kPerClass) {
    throw InputError("shrunk covariances are only kept in per_class mode");
  }
  const ClassModel& c = at(id);
  if (injected_) return *c.covariance;
  return with_class_context(id,
                            [&] { return shrink(*c.raw_covariance, config_.gamma1, config_.gamma2); });
}

void FeCAMModel::seal_common() {
  if (config_.mode != CovarianceMode::kCommon || !common_raw_) {
    common_precision_.reset();
    return;
  }
  const auto shrunk = injected_ ? shrink(*common_raw_, 0.0, 0.0)
                                : shrink(*common_raw_, config_.gamma1, config_.gamma2);
  common_precision_ = invert_spd(shrunk);
}

FeCAMModel FeCAMModel::from_gaussians(ClassifierConfig config, std::span<const ClassId> ids,
                                      std::span<const Vector> means,
                                      std::span<const Eigen::MatrixXd> covariances) {
  if (ids.size() != means.size() || ids.size() != covariances.size()) {
    throw DimensionError("from_gaussians: ids, means and covariances differ in length");
  }
  if (ids.empty()) throw InputError("from_gaussians needs at least one class");
  RawState state;
  state.config = config;
  state.dim = static_cast<std::size_t>(means[0].size());
  state.injected = true;
  Eigen::MatrixXd common_sum;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (static_cast<std::size_t>(means[i].size()) != state.dim ||
        static_cast<std::size_t>(covariances[i].rows()) != state.dim) {
      throw DimensionError("from_gaussians: class " + std::to_string(ids[i]) +
                           " has inconsistent dimensions");
    }
    ClassModel c;
    c.id = ids[i];
    c.prototype_raw = means[i];
    c.prototype_scored = means[i];
    switch (config.mode) {
      case CovarianceMode::kPerClass:
        c.raw_covariance = CovarianceMatrix::from_dense(covariances[i], Stage::kRaw, 0, 1e-9);
        break;
      case CovarianceMode::kDiagonal:
        c.raw_variances = covariances[i].diagonal();
        break;
      case CovarianceMode::kCommon:
        common_sum = i == 0 ? covariances[i] : Eigen::MatrixXd(common_sum + covariances[i]);
        break;
      case CovarianceMode::kEuclidean:
        break;
    }
    state.classes.push_back(std::move(c));
  }
  if (config.mode == CovarianceMode::kCommon) {
    state.common_raw = CovarianceMatrix::from_dense(
        common_sum / static_cast<double>(ids.size()), Stage::kRaw, 0, 1e-9);
    state.common_classes = ids.size();
  }
  state.task_log.push_back({0, std::vector<ClassId>(ids.begin(), ids.end()), 0});
  return restore(std::move(state));
}

FeCAMModel FeCAMModel::restore(RawState state) {
  FeCAMModel model(state.config);
  model.dim_ = state.dim;
  model.task_log_ = std::move(state.task_log);
  model.tukey_bypassed_ = state.tukey_bypassed;
  model.injected_ = state.injected;
  model.common_raw_ = std::move(state.common_raw);
  model.common_classes_ = state.common_classes;

  std::vector<ClassModel>& classes = state.classes;
  for (const auto& c : classes) {
    if (static_cast<std::size_t>(c.prototype_raw.size()) != state.dim ||
        static_cast<std::size_t>(c.prototype_scored.size()) != state.dim) {
      throw DimensionError("class " + std::to_string(c.id) + " prototype has wrong dimension");
    }
  }
  parallel_for(classes.size(), worker_count(), [&](std::size_t i) {
    seal_class(classes[i], model.config_, model.injected_);
  });
  for (auto& c : classes) {
    const ClassId id = c.id;
    if (!model.classes_.emplace(id, std::make_shared<const ClassModel>(std::move(c))).second) {
      throw InputError("duplicate class id " + std::to_string(id));
    }
  }
  model.seal_common();
  return model;
}

FeCAMModel fit_task(const FeCAMModel& model, const RowMatrix& features,
                    std::span<const ClassId> labels) {
  if (model.injected_) throw InputError("cannot fit tasks on a model built from known Gaussians");
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n) {
    throw DimensionError("fit_task got " + std::to_string(n) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  if (n == 0) throw InputError("fit_task needs at least one sample");
  const auto dim = static_cast<std::size_t>(features.cols());
  if (dim == 0) throw DimensionError("features must have at least one dimension");
  if (model.dim_ != 0 && dim != model.dim_) {
    throw DimensionError("features have dimension " + std::to_string(dim) +
                         " but the model was fitted with " + std::to_string(model.dim_));
  }
  require_finite(features, "features");

  const ClassifierConfig& config = model.config_;
  FeCAMModel next = model;
  next.dim_ = dim;

  const TukeyConfig& requested = config.tukey;
  const bool transform_active =
      requested.enabled && requested.lambda != 1.0 && !model.tukey_bypassed_;
  if (transform_active && tukey_domain_violation(features, requested)) {
    if (model.empty() && requested.negative_policy == NegativePolicy::kBypass &&
        requested.lambda != 0.0) {
      next.tukey_bypassed_ = true;
    } else if (!model.empty()) {
      throw InputError(
          "features fall outside the Tukey transform's domain, but earlier tasks were "
          "fitted with the transform active");
    }
  }
  TukeyConfig tukey_config = next.effective_tukey();
  tukey_config.negative_policy = NegativePolicy::kError;
  const RowMatrix transformed = tukey(features, tukey_config).values;

  std::map<ClassId, std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[labels[i]].push_back(static_cast<Eigen::Index>(i));

  std::vector<FittedClass> fitted(groups.size());
  {
    std::vector<std::pair<ClassId, const std::vector<Eigen::Index>*>> jobs;
    for (const auto& [id, rows] : groups) jobs.emplace_back(id, &rows);
    parallel_for(jobs.size(), worker_count(), [&](std::size_t i) {
      const auto& [id, rows] = jobs[i];
      FittedClass& f = fitted[i];
      f.id = id;
      f.count = rows->size();
      const RowMatrix raw = gather(features, *rows);
      f.mean_raw = raw.colwise().mean().transpose();
      const RowMatrix tr = gather(transformed, *rows);
      f.mean_transformed = tr.colwise().mean().transpose();
      with_class_context(id, [&] {
        switch (config.mode) {
          case CovarianceMode::kPerClass:
          case CovarianceMode::kCommon:
            f.covariance = estimate_covariance(tr, f.mean_transformed, config.divisor);
            break;
          case CovarianceMode::kDiagonal:
            f.variances = column_variances(tr, f.mean_transformed, config.divisor);
            break;
          case CovarianceMode::kEuclidean:
            break;
        }
      });
    });
  }

  std::vector<ClassModel> updated(fitted.size());
  std::size_t reseen = 0;
  for (std::size_t i = 0; i < fitted.size(); ++i) {
    const FittedClass& f = fitted[i];
    ClassModel& c = updated[i];
    c.id = f.id;
    const ClassModel* prev = model.find(f.id);
    if (prev == nullptr) {
      c.count = f.count;
      c.prototype_raw = f.mean_raw;
      c.prototype_scored = config.prototype_order == PrototypeOrder::kTransformOfMean
                               ? with_class_context(f.id, [&] { return tukey_vector(f.mean_raw, tukey_config); })
                               : f.mean_transformed;
      if (config.mode == CovarianceMode::kPerClass) c.raw_covariance = f.covariance;
      if (config.mode == CovarianceMode::kDiagonal) c.raw_variances = f.variances;
    } else {
      ++reseen;
      c.count = prev->count + f.count;
      const double w_prev = static_cast<double>(prev->count) / static_cast<double>(c.count);
      const double w_new = static_cast<double>(f.count) / static_cast<double>(c.count);
      c.prototype_raw = w_prev * prev->prototype_raw + w_new * f.mean_raw;
      c.prototype_scored =
          config.prototype_order == PrototypeOrder::kTransformOfMean
              ? with_class_context(f.id, [&] { return tukey_vector(c.prototype_raw, tukey_config); })
              : Vector(w_prev * prev->prototype_scored + w_new * f.mean_transformed);
      if (config.mode == CovarianceMode::kPerClass) {
        c.raw_covariance = average_domain(*prev->raw_covariance, *f.covariance);
      }
      if (config.mode == CovarianceMode::kDiagonal) {
        c.raw_variances = 0.5 * (prev->raw_variances + f.variances);
      }
    }
  }

  parallel_for(updated.size(), worker_count(),
               [&](std::size_t i) { seal_class(updated[i], config, false); });

  if (config.mode == CovarianceMode::kCommon) {
    std::vector<double> sum(packed_size(dim), 0.0);
    std::size_t rows_used = 0;
    for (const auto& f : fitted) {
      const auto packed = f.covariance->packed();
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += packed[k];
      rows_used += f.count;
    }
    for (double& v : sum) v /= static_cast<double>(fitted.size());
    const auto task_cov =
        CovarianceMatrix::from_packed(dim, std::move(sum), Stage::kRaw, rows_used);
    const std::size_t fresh = fitted.size() - reseen;
    if (reseen == 0) {
      next.common_raw_ = merge_common(model.common_raw_ ? *model.common_raw_ : task_cov,
                                      model.common_classes_, task_cov,
                                      model.common_classes_ + fresh);
      next.common_classes_ = model.common_classes_ + fresh;
    } else if (fresh == 0) {
      next.common_raw_ = average_domain(*model.common_raw_, task_cov);
    } else {
      throw InputError(
          "common mode cannot mix new and previously seen classes in a single task");
    }
    next.seal_common();
  }

  TaskRecord record;
  record.task_index = model.task_log_.size();
  record.reseen_classes = reseen;
  for (auto& c : updated) {
    record.class_ids.push_back(c.id);
    const ClassId id = c.id;
    next.classes_[id] = std::make_shared<const ClassModel>(std::move(c));
  }
  next.task_log_.push_back(std::move(record));
  return next;
}

double Prediction::distance_to(ClassId id) const {
  const auto it = std::lower_bound(distances.begin(), distances.end(), id,
                                   [](const ClassDistance& d, ClassId key) { return d.id < key; });
  if (it == distances.end() || it->id != id) {
    throw InputError("prediction has no distance for class " + std::to_string(id));
  }
  return it->distance;
}

double squared_mahalanobis(const Vector& x, const Vector& proto, const PrecisionMatrix& precision) {
  if (static_cast<std::size_t>(x.size()) != precision.dim() ||
      static_cast<std::size_t>(proto.size()) != precision.dim()) {
    throw DimensionError("squared_mahalanobis: vectors of length " + std::to_string(x.size()) +
                         " and " + std::to_string(proto.size()) + " vs precision dimension " +
                         std::to_string(precision.dim()));
  }
  return precision.quadratic_form(x - proto);
}

std::vector<Prediction> predict(const FeCAMModel& model, const RowMatrix& queries,
                                const PredictOptions& options) {
  const RowMatrix q = prepare_queries(model, queries);
  const auto classes = ordered_classes(model);
  const std::size_t threads = worker_count(options.threads);
  const bool log_det = model.config().log_det_correction;
  DistanceMatrix distances(q.rows(), static_cast<Eigen::Index>(classes.size()));

  switch (model.config().mode) {
    case CovarianceMode::kPerClass:
      if (model.config().scoring == ScoringPrecision::kMixed) {
        per_class_mixed(q, classes, log_det, distances, threads);
      } else {
        per_class_exact(q, classes, log_det, distances, threads);
      }
      break;
    case CovarianceMode::kCommon:
      common_distances(q, classes, *model.common_precision(), log_det, distances, threads);
      break;
    case CovarianceMode::kDiagonal:
      diagonal_distances(q, classes, log_det, distances, threads);
      break;
    case CovarianceMode::kEuclidean:
      euclidean_distances(q, classes, distances, threads);
      break;
  }
  return finalize(distances, classes);
}

std::vector<Prediction> predict_euclidean(const FeCAMModel& model, const RowMatrix& queries,
                                          const PredictOptions& options) {
  const RowMatrix q = prepare_queries(model, queries);
  const auto classes = ordered_classes(model);
  DistanceMatrix distances(q.rows(), static_cast<Eigen::Index>(classes.size()));
  euclidean_distances(q, classes, distances, worker_count(options.threads));
  return finalize(distances, classes);
}

std::vector<ClassId> labels_of(std::span<const Prediction> predictions) {
  std::vector<ClassId> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back(p.label);
  return out;
}

double accuracy(std::span<const ClassId> predicted, std::span<const ClassId> truth) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

StorageReport model_storage_report(const FeCAMModel& model) {
  constexpr std::uint64_t kFloatBytes = 4;
  const std::uint64_t classes = model.class_count();
  const std::uint64_t dim = model.dim();
  StorageReport report;
  if (classes == 0) return report;
  report.prototype_bytes = classes * dim * kFloatBytes;
  switch (model.config().mode) {
    case CovarianceMode::kPerClass:
      report.covariance_bytes = classes * packed_size(dim) * kFloatBytes;
      break;
    case CovarianceMode::kCommon:
      report.covariance_bytes = model.common_covariance() ? packed_size(dim) * kFloatBytes : 0;
      break;
    case CovarianceMode::kDiagonal:
      report.covariance_bytes = classes * dim * kFloatBytes;
      break;
    case CovarianceMode::kEuclidean:
      break;
  }
  return report;
}

}  // namespace fecam
