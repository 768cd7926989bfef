#include "fecam/classifier.hpp"
#include "fecam/covariance.hpp"
#include "fecam/synth.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace fecam;

SynthData random_spd_data(std::size_t classes, std::size_t dim, std::size_t rows) {
  SynthSpec spec;
  spec.classes = classes;
  spec.dim = dim;
  spec.rows_per_class = rows;
  spec.seed = 17;
  spec.shapes = {ClassShape{CovarianceShape::kRandomSpd, 1.0, 1.0}};
  return synth_generate(spec);
}

ClassifierConfig config(CovarianceMode mode, ScoringPrecision scoring = ScoringPrecision::kMixed) {
  ClassifierConfig c;
  c.mode = mode;
  c.scoring = scoring;
  c.tukey.enabled = false;
  return c;
}

// Args: dim, classes.
void BM_FitPerClass(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto classes = static_cast<std::size_t>(state.range(1));
  const SynthData d = random_spd_data(classes, dim, dim + 50);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_task(FeCAMModel(config(CovarianceMode::kPerClass)), d.data.values,
                                      d.data.labels));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(classes));
}
BENCHMARK(BM_FitPerClass)->Args({64, 50})->Args({256, 20})->Args({512, 10})->Unit(benchmark::kMillisecond);

// Args: dim, classes, mode, scoring.
void BM_Predict(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto classes = static_cast<std::size_t>(state.range(1));
  const auto mode = static_cast<CovarianceMode>(state.range(2));
  const auto scoring = static_cast<ScoringPrecision>(state.range(3));
  const SynthData d = random_spd_data(classes, dim, dim + 50);
  const FeCAMModel model = fit_task(FeCAMModel(config(mode, scoring)), d.data.values, d.data.labels);
  const FeatureMatrix q = synth_draw(d.truth, 10, 18);
  for (auto _ : state) benchmark::DoNotOptimize(predict(model, q.values, {1}));
  state.SetItemsProcessed(state.iterations() * q.values.rows());
}
BENCHMARK(BM_Predict)
    ->ArgNames({"dim", "classes", "mode", "exact"})
    ->Args({512, 100, 0, 0})
    ->Args({512, 100, 0, 1})
    ->Args({512, 100, 1, 0})
    ->Args({512, 100, 2, 0})
    ->Args({512, 100, 3, 0})
    ->Args({64, 100, 0, 0})
    ->Unit(benchmark::kMillisecond);

void BM_InvertSpd(benchmark::State& state) {
  const auto dim = static_cast<Eigen::Index>(state.range(0));
  const Eigen::MatrixXd g = Eigen::MatrixXd::Random(dim, dim);
  const auto cov = CovarianceMatrix::from_dense(
      Eigen::MatrixXd(g * g.transpose() + Eigen::MatrixXd::Identity(dim, dim)), Stage::kNormalized);
  for (auto _ : state) benchmark::DoNotOptimize(invert_spd(cov));
}
BENCHMARK(BM_InvertSpd)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
