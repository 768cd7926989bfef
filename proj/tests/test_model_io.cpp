#include "fecam/embedding_io.hpp"
#include "fecam/error.hpp"
#include "fecam/model_io.hpp"
#include "fecam/synth.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace fecam {
namespace {

namespace fs = std::filesystem;

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Positive features so the default transform applies.
SynthData positive_blobs(std::size_t classes, std::size_t rows, std::uint64_t seed) {
  SynthSpec spec;
  spec.classes = classes;
  spec.dim = 5;
  spec.rows_per_class = rows;
  spec.seed = seed;
  SynthData d = synth_generate(spec);
  d.data.values.array() = d.data.values.array().abs();
  return d;
}

FeCAMModel two_task_model(const ClassifierConfig& config, std::uint64_t seed) {
  const SynthData d = positive_blobs(6, 20, seed);
  std::vector<std::size_t> first, second;
  for (std::size_t r = 0; r < d.data.rows(); ++r) {
    (d.data.labels[r] < 4 ? first : second).push_back(r);
  }
  const FeatureMatrix a = d.data.select(first);
  const FeatureMatrix b = d.data.select(second);
  return fit_task(fit_task(FeCAMModel(config), a.values, a.labels), b.values, b.labels);
}

void expect_round_trip(const FeCAMModel& model, const RowMatrix& queries) {
  const auto bytes = serialize_model(model);
  const FeCAMModel back = deserialize_model(bytes);
  EXPECT_EQ(serialize_model(back), bytes);
  EXPECT_EQ(back.config(), model.config());
  EXPECT_EQ(back.class_ids(), model.class_ids());
  EXPECT_EQ(back.task_log(), model.task_log());
  EXPECT_EQ(back.tukey_bypassed(), model.tukey_bypassed());
  EXPECT_EQ(back.injected(), model.injected());
  // Reloaded statistics are single-precision copies, so compare with a
  // model rebuilt from the reloaded one rather than the original.
  const auto again = deserialize_model(serialize_model(back));
  EXPECT_EQ(labels_of(predict(back, queries)), labels_of(predict(again, queries)));
}

class ModelRoundTrip : public ::testing::TestWithParam<CovarianceMode> {};

TEST_P(ModelRoundTrip, WriteReadWriteIsBitIdentical) {
  ClassifierConfig c;
  c.mode = GetParam();
  const FeCAMModel model = two_task_model(c, 3);
  const FeatureMatrix q = synth_draw(positive_blobs(6, 1, 3).truth, 30, 4);
  RowMatrix queries = q.values.array().abs();
  expect_round_trip(model, queries);

  // Predictions agree with the original model except where the f32 storage
  // of the statistics can flip a near tie.
  const FeCAMModel back = deserialize_model(serialize_model(model));
  const auto want = predict(model, queries);
  const auto got = predict(back, queries);
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].margin > 1e-3) {
      EXPECT_EQ(got[i].label, want[i].label) << "row " << i;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllModes, ModelRoundTrip,
                         ::testing::Values(CovarianceMode::kPerClass, CovarianceMode::kCommon,
                                           CovarianceMode::kDiagonal, CovarianceMode::kEuclidean),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(ModelIo, MeanOfTransformedKeepsScoredPrototypes) {
  ClassifierConfig c;
  c.prototype_order = PrototypeOrder::kMeanOfTransformed;
  const FeCAMModel model = two_task_model(c, 5);
  const FeCAMModel back = deserialize_model(serialize_model(model));
  for (ClassId id : model.class_ids()) {
    const Vector want = model.at(id).prototype_scored.cast<float>().cast<double>();
    EXPECT_EQ(back.at(id).prototype_scored, want);
  }
  expect_round_trip(model, RowMatrix::Constant(3, 5, 1.0));
}

TEST(ModelIo, InjectedModelsRoundTrip) {
  const GaussianParams p = synth_parameters([] {
    SynthSpec s;
    s.classes = 3;
    s.dim = 4;
    s.shapes = {ClassShape{CovarianceShape::kRandomSpd, 1.0, 1.0}};
    return s;
  }());
  ClassifierConfig c;
  c.tukey.enabled = false;
  const FeCAMModel model = FeCAMModel::from_gaussians(c, p.ids, p.means, p.covariances);
  const FeCAMModel back = deserialize_model(serialize_model(model));
  EXPECT_TRUE(back.injected());
  const FeatureMatrix q = synth_draw(p, 50, 1);
  expect_round_trip(model, q.values);
}

TEST(ModelIo, BypassedTransformIsRemembered) {
  ClassifierConfig c;
  c.tukey.negative_policy = NegativePolicy::kBypass;
  SynthSpec spec;
  spec.classes = 3;
  spec.dim = 3;
  spec.rows_per_class = 20;
  const SynthData d = synth_generate(spec);
  const FeCAMModel model = fit_task(FeCAMModel(c), d.data.values, d.data.labels);
  ASSERT_TRUE(model.tukey_bypassed());
  const FeCAMModel back = deserialize_model(serialize_model(model));
  EXPECT_TRUE(back.tukey_bypassed());
  EXPECT_EQ(back.effective_tukey().enabled, false);
}

TEST(ModelIo, GoldenFixtureLoadsAndReserializes) {
  const fs::path dir = FECAM_FIXTURE_DIR;
  const auto golden = slurp(dir / "tiny_per_class.fecm");
  ASSERT_FALSE(golden.empty());
  const FeCAMModel model = deserialize_model(golden);
  EXPECT_EQ(model.class_ids(), (std::vector<ClassId>{0, 1}));
  EXPECT_EQ(model.at(1).prototype_raw, (Vector{{5.0, 6.0}}));
  EXPECT_EQ(model.at(1).raw_covariance->to_dense(), (Eigen::Matrix2d() << 1, 0, 0, 4).finished());
  EXPECT_EQ(serialize_model(model), golden);

  ClassifierConfig c;
  c.tukey.enabled = false;
  const FeatureMatrix data = read_embeddings(dir / "tiny.femb");
  EXPECT_EQ(serialize_model(fit_task(FeCAMModel(c), data.values, data.labels)), golden);
}

TEST(ModelIo, SaveAndLoadFiles) {
  const fs::path p = fs::temp_directory_path() / "fecam_model_io_roundtrip.fecm";
  const FeCAMModel model = two_task_model({}, 8);
  save_model(p, model);
  EXPECT_EQ(serialize_model(load_model(p)), serialize_model(model));
  EXPECT_THROW(load_model(p.string() + ".missing"), Error);
}

std::uint64_t format_offset(std::span<const std::uint8_t> bytes) {
  try {
    deserialize_model(bytes);
  } catch (const FormatError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected a FormatError";
  return 0;
}

TEST(ModelIo, RejectsCorruptFiles) {
  const auto good = slurp(fs::path(FECAM_FIXTURE_DIR) / "tiny_per_class.fecm");
  ASSERT_FALSE(good.empty());
  auto bad = good;
  bad[1] = 'X';
  EXPECT_EQ(format_offset(bad), 0u);
  bad = good;
  bad[4] = 9;
  EXPECT_EQ(format_offset(bad), 4u);
  bad = good;
  bad[6] = 4;
  EXPECT_EQ(format_offset(bad), 6u);
  bad = good;
  const std::uint32_t huge = (1u << 16) + 1;
  std::memcpy(bad.data() + 7, &huge, 4);
  EXPECT_EQ(format_offset(bad), 7u);

  // Truncation anywhere is reported at the end of the available bytes.
  for (std::size_t cut : {std::size_t{20}, std::size_t{60}, good.size() - 1}) {
    bad.assign(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(deserialize_model(bad), FormatError) << "cut at " << cut;
  }

  // Duplicate class id: the second record starts at 15 + 4 + 4 + 8 + 12.
  bad = good;
  const std::size_t second = 15 + 28;
  std::memset(bad.data() + second, 0, 4);
  EXPECT_EQ(format_offset(bad), second);

  // Unknown trailer section.
  bad = good;
  const char junk[] = {'J', 'U', 'N', 'K', 0, 0, 0, 0};
  bad.insert(bad.end(), junk, junk + 8);
  EXPECT_EQ(format_offset(bad), good.size());

  // Missing CONF: rename its tag.
  bad = good;
  const std::size_t conf = 15 + 2 * 28;
  ASSERT_EQ(std::string(bad.begin() + conf, bad.begin() + conf + 4), "CONF");
  bad[conf] = 'X';
  EXPECT_THROW(deserialize_model(bad), FormatError);

  // Invalid enum inside CONF: the divisor byte.
  bad = good;
  bad[conf + 8 + 8 + 8 + 1 + 8 + 1] = 7;
  EXPECT_EQ(format_offset(bad), conf + 8 + 26);
}

}  // namespace
}  // namespace fecam
