#include "fecam/classifier.hpp"
#include "fecam/error.hpp"
#include "fecam/model_io.hpp"
#include "fecam/synth.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>

namespace fecam {
namespace {

ClassifierConfig plain(CovarianceMode mode = CovarianceMode::kPerClass, double gamma = 1.0) {
  ClassifierConfig c;
  c.mode = mode;
  c.tukey.enabled = false;
  c.gamma1 = gamma;
  c.gamma2 = gamma;
  return c;
}

FeCAMModel fit_once(const ClassifierConfig& config, const FeatureMatrix& data) {
  return fit_task(FeCAMModel(config), data.values, data.labels);
}

SynthData blobs(std::size_t classes, std::size_t dim, std::size_t rows, std::uint64_t seed,
                CovarianceShape shape = CovarianceShape::kRandomSpd) {
  SynthSpec spec;
  spec.classes = classes;
  spec.dim = dim;
  spec.rows_per_class = rows;
  spec.seed = seed;
  spec.shapes = {ClassShape{shape, 1.0, 1.0}};
  return synth_generate(spec);
}

std::vector<Eigen::MatrixXd> identities(std::size_t n, Eigen::Index dim) {
  return std::vector<Eigen::MatrixXd>(n, Eigen::MatrixXd::Identity(dim, dim));
}

TEST(FitTask, SingleClassMatchesBruteForceStatistics) {
  RowMatrix x(3, 2);
  x << 1, 2, 3, 7, 5, 0;
  const std::vector<ClassId> y = {4, 4, 4};
  const auto model = fit_task(FeCAMModel(plain()), x, y);
  const ClassModel& c = model.at(4);
  EXPECT_EQ(c.count, 3u);
  EXPECT_NEAR(c.prototype_raw[0], 3.0, 1e-12);
  EXPECT_NEAR(c.prototype_raw[1], 3.0, 1e-12);
  // Population covariance by hand: deviations (-2,-1), (0,4), (2,-3).
  Eigen::MatrixXd want(2, 2);
  want << 8.0 / 3.0, -4.0 / 3.0, -4.0 / 3.0, 26.0 / 3.0;
  EXPECT_LT(test::relative_error(c.raw_covariance->to_dense(), want), 1e-14);
  ASSERT_TRUE(c.precision.has_value());
  EXPECT_EQ(c.covariance->stage(), Stage::kNormalized);
}

TEST(FitTask, IsotropicDataReducesToEuclidean) {
  const SynthData d = blobs(2, 2, 5000, 3, CovarianceShape::kIsotropic);
  const auto model = fit_once(plain(CovarianceMode::kPerClass, 0.0), d.data);
  for (ClassId id : model.class_ids()) {
    const Eigen::MatrixXd cov = model.at(id).covariance->to_dense();
    EXPECT_LT((cov - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.05);
  }
  const FeatureMatrix q = synth_draw(d.truth, 500, 99);
  const auto a = labels_of(predict(model, q.values));
  const auto b = labels_of(predict_euclidean(model, q.values));
  EXPECT_GE(accuracy(a, b), 0.99);
}

TEST(FitTask, ManyShotProtocolShape) {
  const SynthData d = blobs(100, 6, 20, 5);
  FeCAMModel model(plain());
  std::size_t calls = 0;
  for (std::size_t task = 0; task < 6; ++task) {
    const std::size_t lo = task == 0 ? 0 : 50 + 10 * (task - 1);
    const std::size_t hi = task == 0 ? 50 : lo + 10;
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < d.data.rows(); ++r) {
      if (d.data.labels[r] >= lo && d.data.labels[r] < hi) rows.push_back(r);
    }
    const FeatureMatrix part = d.data.select(rows);
    model = fit_task(model, part.values, part.labels);
    ++calls;
  }
  EXPECT_EQ(calls, 6u);
  EXPECT_EQ(model.class_count(), 100u);
  EXPECT_EQ(model.task_log().size(), 6u);
  for (const auto& [id, c] : model.classes()) EXPECT_TRUE(c->precision.has_value()) << id;
}

TEST(FitTask, InputModelIsNotModified) {
  const SynthData d = blobs(6, 4, 30, 8);
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  for (std::size_t r = 0; r < d.data.rows(); ++r) {
    (d.data.labels[r] < 3 ? first : second).push_back(r);
  }
  const FeatureMatrix a = d.data.select(first);
  const FeatureMatrix b = d.data.select(second);
  for (auto mode : {CovarianceMode::kPerClass, CovarianceMode::kCommon, CovarianceMode::kDiagonal,
                    CovarianceMode::kEuclidean}) {
    const auto model = fit_once(plain(mode), a);
    const auto before = serialize_model(model);
    const auto next = fit_task(model, b.values, b.labels);
    EXPECT_EQ(serialize_model(model), before);
    EXPECT_EQ(model.class_count(), 3u);
    EXPECT_EQ(next.class_count(), 6u);
    // Unchanged classes are shared, not copied.
    EXPECT_EQ(model.classes().at(0).get(), next.classes().at(0).get());
  }
}

TEST(FitTask, PrecisionMatchesStoredCovariance) {
  const SynthData d = blobs(4, 5, 40, 12);
  const auto model = fit_once(plain(), d.data);
  for (const auto& [id, c] : model.classes()) {
    const auto again = invert_spd(*c->covariance);
    const auto f1 = c->precision->factor();
    const auto f2 = again.factor();
    EXPECT_TRUE(std::equal(f1.begin(), f1.end(), f2.begin(), f2.end()));
    EXPECT_EQ(model.shrunk_covariance(id), shrink(*c->raw_covariance, 1.0, 1.0));
  }
}

TEST(FitTask, PrototypeOrderVariants) {
  RowMatrix x(2, 2);
  x << 1, 4, 9, 16;
  const std::vector<ClassId> y = {0, 0};
  ClassifierConfig c = plain(CovarianceMode::kEuclidean);
  c.tukey.enabled = true;
  const auto of_mean = fit_task(FeCAMModel(c), x, y);
  EXPECT_NEAR(of_mean.at(0).prototype_scored[0], std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(of_mean.at(0).prototype_scored[1], std::sqrt(10.0), 1e-15);
  c.prototype_order = PrototypeOrder::kMeanOfTransformed;
  const auto of_transformed = fit_task(FeCAMModel(c), x, y);
  EXPECT_NEAR(of_transformed.at(0).prototype_scored[0], 2.0, 1e-15);
  EXPECT_NEAR(of_transformed.at(0).prototype_scored[1], 3.0, 1e-15);
  EXPECT_EQ(of_transformed.at(0).prototype_raw, of_mean.at(0).prototype_raw);
}

TEST(FitTask, CovarianceUsesTransformedFeatures) {
  RowMatrix x(2, 1);
  x << 1, 9;
  const std::vector<ClassId> y = {0, 0};
  ClassifierConfig c = plain();
  c.tukey.enabled = true;
  const auto model = fit_task(FeCAMModel(c), x, y);
  // sqrt gives 1 and 3: population variance 1.
  EXPECT_NEAR(model.at(0).raw_covariance->to_dense()(0, 0), 1.0, 1e-15);
}

TEST(FitTask, NegativeFeaturesUnderTukeyPolicies) {
  RowMatrix x(2, 2);
  x << -1, 2, 3, 4;
  const std::vector<ClassId> y = {0, 1};
  ClassifierConfig c = plain(CovarianceMode::kEuclidean);
  c.tukey.enabled = true;
  EXPECT_THROW(fit_task(FeCAMModel(c), x, y), InputError);

  c.tukey.negative_policy = NegativePolicy::kBypass;
  const auto model = fit_task(FeCAMModel(c), x, y);
  EXPECT_TRUE(model.tukey_bypassed());
  EXPECT_FALSE(model.effective_tukey().enabled);
  EXPECT_EQ(model.at(0).prototype_scored, model.at(0).prototype_raw);

  // A transform that was applied to the first task cannot be dropped later.
  RowMatrix positive(1, 2);
  positive << 1, 1;
  const std::vector<ClassId> y0 = {0};
  const auto active = fit_task(FeCAMModel(c), positive, y0);
  EXPECT_FALSE(active.tukey_bypassed());
  const std::vector<ClassId> y2 = {2};
  RowMatrix negative(1, 2);
  negative << -1, 1;
  EXPECT_THROW(fit_task(active, negative, y2), InputError);
}

TEST(FitTask, Errors) {
  RowMatrix x(2, 2);
  x << 1, 2, 3, 4;
  const std::vector<ClassId> y = {0, 1};
  const auto model = fit_task(FeCAMModel(plain(CovarianceMode::kEuclidean)), x, y);
  EXPECT_THROW(fit_task(model, RowMatrix::Ones(2, 3), y), DimensionError);
  EXPECT_THROW(fit_task(model, x, std::vector<ClassId>{0}), DimensionError);
  EXPECT_THROW(fit_task(model, RowMatrix(0, 2), std::vector<ClassId>{}), InputError);
  RowMatrix bad = x;
  bad(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(fit_task(model, bad, y), InputError);
}

TEST(FitTask, SingleSampleClassIsRejectedUnderShrinkage) {
  RowMatrix x(1, 3);
  x << 1, 2, 3;
  const std::vector<ClassId> y = {7};
  try {
    fit_task(FeCAMModel(plain()), x, y);
    FAIL() << "expected ConditioningError";
  } catch (const ConditioningError& e) {
    EXPECT_NE(std::string(e.what()).find("class 7"), std::string::npos);
  }
}

TEST(FitTask, DomainPathAveragesCovarianceAndPoolsPrototype) {
  std::mt19937_64 rng(4);
  const RowMatrix a = test::gaussian_rows(30, 3, rng);
  const RowMatrix b = (test::gaussian_rows(10, 3, rng).array() * 2.0 + 1.0).matrix();
  const std::vector<ClassId> ya(30, 5);
  const std::vector<ClassId> yb(10, 5);
  const auto m1 = fit_task(FeCAMModel(plain()), a, ya);
  const auto m2 = fit_task(m1, b, yb);
  const ClassModel& c = m2.at(5);
  EXPECT_EQ(c.count, 40u);
  RowMatrix all(40, 3);
  all << a, b;
  const Vector pooled = all.colwise().mean().transpose();
  EXPECT_LT((c.prototype_raw - pooled).norm(), 1e-12);

  const Vector mb = b.colwise().mean().transpose();
  const Eigen::MatrixXd want =
      0.5 * (m1.at(5).raw_covariance->to_dense() + estimate_covariance(b, mb).to_dense());
  EXPECT_LT(test::relative_error(c.raw_covariance->to_dense(), want), 1e-14);
  EXPECT_EQ(m2.task_log().back().reseen_classes, 1u);
}

TEST(FitTask, CommonModeMergesByClassCount) {
  const SynthData d = blobs(5, 3, 25, 21);
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  for (std::size_t r = 0; r < d.data.rows(); ++r) {
    (d.data.labels[r] < 2 ? first : second).push_back(r);
  }
  const FeatureMatrix a = d.data.select(first);
  const FeatureMatrix b = d.data.select(second);
  const auto m1 = fit_once(plain(CovarianceMode::kCommon), a);
  const auto m2 = fit_task(m1, b.values, b.labels);
  EXPECT_EQ(m2.common_class_count(), 5u);

  // Independent recomputation: task matrix = mean of within-class covariances.
  auto task_matrix = [](const FeatureMatrix& part) {
    std::map<ClassId, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < part.rows(); ++r) groups[part.labels[r]].push_back(r);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3);
    for (const auto& [id, rows] : groups) {
      const FeatureMatrix g = part.select(rows);
      sum += estimate_covariance(g.values, g.values.colwise().mean().transpose()).to_dense();
    }
    return Eigen::MatrixXd(sum / static_cast<double>(groups.size()));
  };
  const Eigen::MatrixXd want = task_matrix(a) * (2.0 / 5.0) + task_matrix(b) * (3.0 / 5.0);
  EXPECT_LT(test::relative_error(m2.common_covariance()->to_dense(), want), 1e-12);

  // Mixing new and re-seen classes in one task is ambiguous in common mode.
  std::vector<ClassId> mixed = a.labels;
  for (auto& l : mixed) l = l == 1 ? 9 : l;
  EXPECT_THROW(fit_task(m2, a.values, mixed), InputError);
}

TEST(SquaredMahalanobis, WorkedExamples) {
  const auto id = invert_spd(shrink(CovarianceMatrix::identity(3), 0, 0));
  const Vector x{{1.0, 2.0, 3.0}};
  const Vector mu{{0.0, 0.0, 1.0}};
  EXPECT_DOUBLE_EQ(squared_mahalanobis(x, mu, id), (x - mu).squaredNorm());
  EXPECT_EQ(squared_mahalanobis(x, x, id), 0.0);

  const auto p = invert_spd(shrink(CovarianceMatrix::diagonal(Vector{{4.0, 1.0}}), 0, 0));
  EXPECT_DOUBLE_EQ(squared_mahalanobis(Vector{{2.0, 0.0}}, Vector::Zero(2), p), 1.0);
  EXPECT_THROW(squared_mahalanobis(Vector::Zero(3), Vector::Zero(2), p), DimensionError);
}

TEST(SquaredMahalanobis, MatchesExplicitInverse) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index d = 1 + trial % 8;
    const Eigen::MatrixXd m = test::random_spd(d, rng);
    const auto p = invert_spd(shrink(CovarianceMatrix::from_dense(m, Stage::kRaw), 0, 0));
    const Vector x = test::gaussian_rows(d, 1, rng);
    const Vector mu = test::gaussian_rows(d, 1, rng);
    const double want = (x - mu).dot(m.inverse() * (x - mu));
    const double got = squared_mahalanobis(x, mu, p);
    EXPECT_NEAR(got, want, 1e-9 * want);
    EXPECT_GE(got, 0.0);
  }
}

TEST(Predict, SingleClassAlwaysWins) {
  RowMatrix x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector<ClassId> y(4, 9);
  const auto model = fit_task(FeCAMModel(plain()), x, y);
  std::mt19937_64 rng(1);
  const auto preds = predict(model, test::gaussian_rows(20, 2, rng) * 100.0);
  for (const auto& p : preds) {
    EXPECT_EQ(p.label, 9u);
    EXPECT_TRUE(std::isinf(p.margin));
  }
}

TEST(Predict, MidpointNudgeGoesToNearerClass) {
  const std::vector<ClassId> ids = {0, 1};
  const std::vector<Vector> means = {Vector{{0.0, 0.0}}, Vector{{2.0, 0.0}}};
  const auto model = FeCAMModel::from_gaussians(plain(), ids, means, identities(2, 2));
  RowMatrix q(2, 2);
  q << 1.0 + 1e-9, 0.0, 1.0 - 1e-9, 0.0;
  const auto labels = labels_of(predict(model, q));
  EXPECT_EQ(labels, (std::vector<ClassId>{1, 0}));
}

TEST(Predict, TiesGoToSmallestId) {
  const std::vector<ClassId> ids = {3, 8};
  const std::vector<Vector> means = {Vector{{0.0, 1.0}}, Vector{{0.0, -1.0}}};
  for (auto mode : {CovarianceMode::kPerClass, CovarianceMode::kCommon, CovarianceMode::kDiagonal,
                    CovarianceMode::kEuclidean}) {
    const auto model = FeCAMModel::from_gaussians(plain(mode), ids, means, identities(2, 2));
    const RowMatrix q = RowMatrix::Zero(1, 2);
    const auto p = predict(model, q);
    EXPECT_EQ(p[0].label, 3u) << to_string(mode);
    EXPECT_EQ(p[0].margin, 0.0);
  }
}

TEST(Predict, HeterogeneousPairFollowsBayesOracle) {
  GaussianParams truth;
  truth.ids = {0, 1};
  truth.means = {Vector{{0.0, 0.0}}, Vector{{3.0, 0.0}}};
  truth.covariances = {Eigen::Vector2d(0.01, 0.01).asDiagonal(), Eigen::Vector2d(4, 4).asDiagonal()};
  const auto model =
      FeCAMModel::from_gaussians(plain(), truth.ids, truth.means, truth.covariances);
  RowMatrix q(1, 2);
  q << 1.6, 0.0;
  const auto fecam = predict(model, q);
  const auto oracle = bayes_oracle(truth, q);
  EXPECT_EQ(fecam[0].label, oracle[0].label);
  EXPECT_EQ(fecam[0].label, 1u);
  EXPECT_NEAR(fecam[0].distance_to(0), 1.6 * 1.6 / 0.01, 1e-9);
  EXPECT_NEAR(fecam[0].distance_to(1), 1.4 * 1.4 / 4.0, 1e-12);
  EXPECT_EQ(predict_euclidean(model, q)[0].label, 1u);

  // At (0.3, 0) the pure Mahalanobis rule (9 vs 1.82) picks the wide class,
  // while the exact posterior keeps the tight one because of its much
  // smaller determinant. The log-det corrected score agrees with the oracle.
  RowMatrix near_a(1, 2);
  near_a << 0.3, 0.0;
  EXPECT_EQ(predict(model, near_a)[0].label, 1u);
  EXPECT_EQ(bayes_oracle(truth, near_a)[0].label, 0u);
  EXPECT_EQ(predict_euclidean(model, near_a)[0].label, 0u);
  ClassifierConfig corrected = plain();
  corrected.log_det_correction = true;
  const auto full = FeCAMModel::from_gaussians(corrected, truth.ids, truth.means, truth.covariances);
  EXPECT_EQ(predict(full, near_a)[0].label, 0u);
  EXPECT_EQ(predict(full, q)[0].label, oracle[0].label);
}

TEST(Predict, LabelIsExhaustiveArgminOfReportedDistances) {
  const SynthData d = blobs(7, 5, 40, 31);
  std::mt19937_64 rng(2);
  for (auto mode : {CovarianceMode::kPerClass, CovarianceMode::kCommon, CovarianceMode::kDiagonal,
                    CovarianceMode::kEuclidean}) {
    const auto model = fit_once(plain(mode), d.data);
    const auto preds = predict(model, test::gaussian_rows(100, 5, rng) * 3.0);
    for (const auto& p : preds) {
      ASSERT_EQ(p.distances.size(), 7u);
      std::size_t best = 0;
      for (std::size_t k = 1; k < p.distances.size(); ++k) {
        EXPECT_LT(p.distances[k - 1].id, p.distances[k].id);
        if (p.distances[k].distance < p.distances[best].distance) best = k;
      }
      EXPECT_EQ(p.label, p.distances[best].id);
    }
  }
}

TEST(Predict, PerClassDistancesMatchIndependentSolve) {
  const SynthData d = blobs(5, 6, 50, 14);
  const auto model = fit_once(plain(), d.data);
  std::mt19937_64 rng(3);
  const RowMatrix q = test::gaussian_rows(30, 6, rng) * 2.0;
  for (auto scoring : {ScoringPrecision::kExact, ScoringPrecision::kMixed}) {
    ClassifierConfig c = plain();
    c.scoring = scoring;
    FeCAMModel::RawState state{c, 6, {}, {}, 0, {}, false, false};
    for (const auto& [id, cls] : model.classes()) {
      ClassModel raw_only;
      raw_only.id = id;
      raw_only.count = cls->count;
      raw_only.prototype_raw = cls->prototype_raw;
      raw_only.prototype_scored = cls->prototype_scored;
      raw_only.raw_covariance = cls->raw_covariance;
      state.classes.push_back(raw_only);
    }
    const auto restored = FeCAMModel::restore(state);
    const auto preds = predict(restored, q);
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      const auto& p = preds[static_cast<std::size_t>(r)];
      for (const auto& [id, cls] : model.classes()) {
        const Eigen::MatrixXd inv = cls->covariance->to_dense().inverse();
        const Vector diff = q.row(r).transpose() - cls->prototype_scored;
        const double want = diff.dot(inv * diff);
        const double tol = scoring == ScoringPrecision::kExact || id == p.label ? 1e-9 : 1e-3;
        EXPECT_NEAR(p.distance_to(id), want, tol * want) << to_string(scoring);
      }
    }
  }
}

TEST(Predict, DiagonalModeMatchesWeightedSquares) {
  const SynthData d = blobs(4, 3, 30, 6);
  const auto model = fit_once(plain(CovarianceMode::kDiagonal), d.data);
  std::mt19937_64 rng(5);
  const RowMatrix q = test::gaussian_rows(20, 3, rng);
  const auto preds = predict(model, q);
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    for (const auto& [id, c] : model.classes()) {
      const Vector diff = q.row(r).transpose() - c->prototype_scored;
      const double want = (diff.array().square() / c->diagonal->variances.array()).sum();
      EXPECT_NEAR(preds[static_cast<std::size_t>(r)].distance_to(id), want, 1e-10 * want);
    }
  }
}

TEST(Predict, EuclideanMatchesPairwiseScan) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t dim = 2 + static_cast<std::size_t>(trial);
    const SynthData d = blobs(6, dim, 10, 40 + static_cast<std::uint64_t>(trial));
    const auto model = fit_once(plain(CovarianceMode::kEuclidean), d.data);
    const RowMatrix q = test::gaussian_rows(100, static_cast<Eigen::Index>(dim), rng) * 3.0;
    const auto preds = predict_euclidean(model, q);
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      ClassId best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (const auto& [id, c] : model.classes()) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < q.cols(); ++k) {
          const double t = q(r, k) - c->prototype_scored[k];
          s += t * t;
        }
        if (s < best_d) {
          best_d = s;
          best = id;
        }
      }
      EXPECT_EQ(preds[static_cast<std::size_t>(r)].label, best);
      EXPECT_NEAR(preds[static_cast<std::size_t>(r)].distance_to(best), best_d, 1e-9 * best_d + 1e-12);
    }
  }
}

TEST(Predict, IdentityCovariancesReduceToEuclidean) {
  std::mt19937_64 rng(10);
  const std::vector<ClassId> ids = {0, 1, 2, 3, 4, 5};
  std::vector<Vector> means;
  for (std::size_t i = 0; i < ids.size(); ++i) means.push_back(test::gaussian_rows(8, 1, rng));
  const auto model = FeCAMModel::from_gaussians(plain(), ids, means, identities(6, 8));
  const RowMatrix q = test::gaussian_rows(500, 8, rng);
  EXPECT_EQ(labels_of(predict(model, q)), labels_of(predict_euclidean(model, q)));
}

TEST(Predict, CommonScaleInvariance) {
  std::mt19937_64 rng(12);
  const std::vector<ClassId> ids = {0, 1, 2, 3};
  std::vector<Vector> means;
  std::vector<Eigen::MatrixXd> covs;
  std::vector<Eigen::MatrixXd> scaled;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    means.push_back(test::gaussian_rows(4, 1, rng));
    covs.push_back(test::random_spd(4, rng));
    scaled.push_back(covs.back() * 7.5);
  }
  const auto a = FeCAMModel::from_gaussians(plain(CovarianceMode::kCommon), ids, means, covs);
  const auto b = FeCAMModel::from_gaussians(plain(CovarianceMode::kCommon), ids, means, scaled);
  const RowMatrix q = test::gaussian_rows(300, 4, rng) * 2.0;
  EXPECT_EQ(labels_of(predict(a, q)), labels_of(predict(b, q)));
}

TEST(Predict, ConstantShiftLeavesLabelsUnchanged) {
  const SynthData d = blobs(5, 4, 30, 16);
  ClassifierConfig c = plain();
  const auto base = fit_once(c, d.data);
  // Equal covariances: the log-det term adds the same constant to every class.
  const std::vector<ClassId> ids = base.class_ids();
  std::vector<Vector> means;
  for (ClassId id : ids) means.push_back(base.at(id).prototype_scored);
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd shared = test::random_spd(4, rng);
  const std::vector<Eigen::MatrixXd> covs(ids.size(), shared);
  const auto plain_model = FeCAMModel::from_gaussians(c, ids, means, covs);
  c.log_det_correction = true;
  const auto shifted = FeCAMModel::from_gaussians(c, ids, means, covs);
  const RowMatrix q = test::gaussian_rows(200, 4, rng) * 2.0;
  const auto p1 = predict(plain_model, q);
  const auto p2 = predict(shifted, q);
  EXPECT_EQ(labels_of(p1), labels_of(p2));
  const double log_det = std::log(shared.determinant());
  EXPECT_NEAR(p2[0].distances[0].distance - p1[0].distances[0].distance, log_det, 1e-9);
}

TEST(Predict, QueriesAreTransformedWithModelSettings) {
  RowMatrix x(4, 1);
  x << 1, 1, 16, 16;
  const std::vector<ClassId> y = {0, 0, 1, 1};
  ClassifierConfig c = plain(CovarianceMode::kEuclidean);
  c.tukey.enabled = true;
  const auto model = fit_task(FeCAMModel(c), x, y);
  RowMatrix q(1, 1);
  q << 6.25;  // sqrt: 2.5 is the midpoint of 1 and 4; raw 6.25 is nearer to 1.
  const auto p = predict(model, q);
  EXPECT_NEAR(p[0].distance_to(0), 1.5 * 1.5, 1e-12);
  EXPECT_NEAR(p[0].distance_to(1), 1.5 * 1.5, 1e-12);
  q << 7.0;
  EXPECT_EQ(predict(model, q)[0].label, 1u);
}

TEST(Predict, Errors) {
  EXPECT_THROW(predict(FeCAMModel(plain()), RowMatrix::Zero(1, 2)), InputError);
  RowMatrix x(2, 2);
  x << 1, 2, 3, 4;
  const auto model = fit_task(FeCAMModel(plain(CovarianceMode::kEuclidean)), x,
                              std::vector<ClassId>{0, 1});
  EXPECT_THROW(predict(model, RowMatrix::Zero(1, 3)), DimensionError);
  EXPECT_THROW(predict_euclidean(model, RowMatrix::Zero(1, 3)), DimensionError);
  EXPECT_THROW(predict(model, RowMatrix::Constant(1, 2, std::nan(""))), InputError);
}

TEST(Predict, ThreadCountDoesNotChangeResults) {
  const SynthData d = blobs(9, 12, 40, 50);
  const auto model = fit_once(plain(), d.data);
  std::mt19937_64 rng(6);
  const RowMatrix q = test::gaussian_rows(700, 12, rng) * 3.0;
  const auto one = predict(model, q, {1});
  const auto four = predict(model, q, {4});
  ASSERT_EQ(one.size(), four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].label, four[i].label);
    for (std::size_t k = 0; k < one[i].distances.size(); ++k) {
      EXPECT_EQ(one[i].distances[k].distance, four[i].distances[k].distance);
    }
  }
}

TEST(Accuracy, Basics) {
  const std::vector<ClassId> a = {1, 2, 3, 4};
  const std::vector<ClassId> b = {1, 2, 0, 4};
  EXPECT_DOUBLE_EQ(accuracy(a, b), 0.75);
  EXPECT_EQ(accuracy(std::vector<ClassId>{}, std::vector<ClassId>{}), 0.0);
  EXPECT_THROW(accuracy(a, std::vector<ClassId>{1}), DimensionError);
}

TEST(StorageReport, ByMode) {
  EXPECT_EQ(model_storage_report(FeCAMModel(plain())).total(), 0u);

  const SynthData d = blobs(3, 4, 20, 1);
  const auto per_class = fit_once(plain(), d.data);
  EXPECT_EQ(model_storage_report(per_class).prototype_bytes, 3u * 4 * 4);
  EXPECT_EQ(model_storage_report(per_class).covariance_bytes, 3u * 10 * 4);
  const auto common = fit_once(plain(CovarianceMode::kCommon), d.data);
  EXPECT_EQ(model_storage_report(common).covariance_bytes, 10u * 4);
  const auto euclid = fit_once(plain(CovarianceMode::kEuclidean), d.data);
  EXPECT_EQ(model_storage_report(euclid).covariance_bytes, 0u);
}

TEST(StorageReport, DiagonalAtFullScale) {
  const SynthData d = blobs(100, 512, 3, 2, CovarianceShape::kIsotropic);
  const auto model = fit_once(plain(CovarianceMode::kDiagonal), d.data);
  EXPECT_EQ(model_storage_report(model).total(), 100u * 2 * 512 * 4);
  EXPECT_EQ(model_storage_report(model).total(), 409'600u);
}

TEST(FromGaussians, Validation) {
  const std::vector<ClassId> ids = {0, 1};
  const std::vector<Vector> means = {Vector::Zero(2), Vector::Zero(3)};
  EXPECT_THROW(FeCAMModel::from_gaussians(plain(), ids, means, identities(2, 2)), DimensionError);
  EXPECT_THROW(FeCAMModel::from_gaussians(plain(), {}, {}, {}), InputError);
  const std::vector<Vector> ok = {Vector::Zero(2), Vector::Ones(2)};
  const auto model = FeCAMModel::from_gaussians(plain(), ids, ok, identities(2, 2));
  EXPECT_TRUE(model.injected());
  RowMatrix x(1, 2);
  x << 0, 0;
  EXPECT_THROW(fit_task(model, x, std::vector<ClassId>{0}), InputError);
}

}  // namespace
}  // namespace fecam
