#include "fecam/model_io.hpp"

#include "binary_io.hpp"
#include "fecam/error.hpp"

#include <limits>
#include <set>

namespace fecam {
namespace {

constexpr std::uint32_t kMaxDim = 1u << 16;

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw InputError(std::string(what) + " does not fit in the model file");
  }
  return static_cast<std::uint32_t>(v);
}

void put_vector(detail::ByteWriter& w, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f32(static_cast<float>(v[i]));
}

void put_packed(detail::ByteWriter& w, const CovarianceMatrix& m) {
  for (double x : m.packed()) w.f32(static_cast<float>(x));
}

Vector get_vector(detail::ByteReader& r, std::size_t dim, const char* field) {
  r.require(4 * dim, field);
  Vector v(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) v[static_cast<Eigen::Index>(i)] = r.f32(field);
  return v;
}

CovarianceMatrix get_packed(detail::ByteReader& r, std::size_t dim, std::size_t source_count,
                            const char* field) {
  const std::size_t n = packed_size(dim);
  r.require(4 * n, field);
  std::vector<double> lower(n);
  for (auto& x : lower) x = r.f32(field);
  return CovarianceMatrix::from_packed(dim, std::move(lower), Stage::kRaw, source_count);
}

CovarianceMatrix with_source_count(const CovarianceMatrix& m, std::size_t source_count) {
  const auto lower = m.packed();
  return CovarianceMatrix::from_packed(m.dim(), {lower.begin(), lower.end()}, Stage::kRaw,
                                       source_count);
}

void put_section(detail::ByteWriter& w, std::string_view tag, detail::ByteWriter body) {
  auto bytes = body.take();
  w.bytes(tag);
  w.u32(to_u32(bytes.size(), "section length"));
  for (auto b : bytes) w.u8(b);
}

bool stores_scored_prototypes(const FeCAMModel& model) {
  return model.injected() || model.config().prototype_order == PrototypeOrder::kMeanOfTransformed;
}

void write_config(detail::ByteWriter& w, const FeCAMModel& model) {
  const ClassifierConfig& c = model.config();
  w.f64(c.gamma1);
  w.f64(c.gamma2);
  w.u8(c.tukey.enabled ? 1 : 0);
  w.f64(c.tukey.lambda);
  w.u8(static_cast<std::uint8_t>(c.tukey.negative_policy));
  w.u8(static_cast<std::uint8_t>(c.divisor));
  w.u8(static_cast<std::uint8_t>(c.prototype_order));
  w.u8(static_cast<std::uint8_t>(c.scoring));
  w.u8(c.log_det_correction ? 1 : 0);
  w.u8(model.tukey_bypassed() ? 1 : 0);
  w.u8(model.injected() ? 1 : 0);
}

template <typename Enum>
Enum read_enum(detail::ByteReader& r, const char* field, std::uint8_t max) {
  const std::size_t at = r.offset();
  const std::uint8_t v = r.u8(field);
  if (v > max) {
    throw FormatError("model file: invalid " + std::string(field) + " " + std::to_string(v), at);
  }
  return static_cast<Enum>(v);
}

bool read_flag(detail::ByteReader& r, const char* field) {
  return read_enum<std::uint8_t>(r, field, 1) != 0;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const FeCAMModel& model) {
  const ClassifierConfig& config = model.config();
  const std::size_t dim = model.dim();
  detail::ByteWriter w;
  w.bytes(kModelMagic);
  w.u16(kModelVersion);
  w.u8(static_cast<std::uint8_t>(config.mode));
  w.u32(to_u32(dim, "dimension"));
  w.u32(to_u32(model.class_count(), "class count"));

  for (const auto& [id, c] : model.classes()) {
    w.u32(id);
    w.u32(to_u32(c->count, "class count"));
    put_vector(w, c->prototype_raw);
    if (config.mode == CovarianceMode::kPerClass) {
      put_packed(w, *c->raw_covariance);
    } else if (config.mode == CovarianceMode::kDiagonal) {
      put_vector(w, c->raw_variances);
    }
  }

  detail::ByteWriter conf;
  write_config(conf, model);
  put_section(w, "CONF", std::move(conf));

  if (config.mode == CovarianceMode::kPerClass || model.common_covariance()) {
    detail::ByteWriter srcn;
    if (config.mode == CovarianceMode::kPerClass) {
      for (const auto& [id, c] : model.classes()) {
        srcn.u32(to_u32(c->raw_covariance->source_count(), "sample count"));
      }
    }
    if (model.common_covariance()) {
      srcn.u32(to_u32(model.common_covariance()->source_count(), "sample count"));
    }
    put_section(w, "SRCN", std::move(srcn));
  }

  if (model.common_covariance()) {
    detail::ByteWriter comn;
    comn.u32(to_u32(model.common_class_count(), "common class count"));
    put_packed(comn, *model.common_covariance());
    put_section(w, "COMN", std::move(comn));
  }

  if (stores_scored_prototypes(model)) {
    detail::ByteWriter pscr;
    for (const auto& [id, c] : model.classes()) put_vector(pscr, c->prototype_scored);
    put_section(w, "PSCR", std::move(pscr));
  }

  detail::ByteWriter tlog;
  tlog.u32(to_u32(model.task_log().size(), "task count"));
  for (const TaskRecord& t : model.task_log()) {
    tlog.u32(to_u32(t.task_index, "task index"));
    tlog.u32(to_u32(t.class_ids.size(), "task class count"));
    for (ClassId id : t.class_ids) tlog.u32(id);
    tlog.u32(to_u32(t.reseen_classes, "re-seen class count"));
  }
  put_section(w, "TLOG", std::move(tlog));
  return w.take();
}

FeCAMModel deserialize_model(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "model file");
  if (r.bytes(4, "magic") != kModelMagic) {
    throw FormatError("model file: bad magic (expected FECM)", 0);
  }
  const std::uint16_t version = r.u16("version");
  if (version != kModelVersion) {
    throw FormatError("model file: unsupported version " + std::to_string(version), 4);
  }

  FeCAMModel::RawState state;
  state.config.mode = read_enum<CovarianceMode>(r, "mode", 3);
  const std::size_t dim_at = r.offset();
  state.dim = r.u32("dimension");
  const std::uint32_t class_count = r.u32("class count");
  if (state.dim > kMaxDim || (state.dim == 0 && class_count > 0)) {
    throw FormatError("model file: dimension " + std::to_string(state.dim) + " out of range",
                      dim_at);
  }
  const CovarianceMode mode = state.config.mode;

  std::set<ClassId> seen;
  for (std::uint32_t i = 0; i < class_count; ++i) {
    const std::size_t record_at = r.offset();
    ClassModel c;
    c.id = r.u32("class id");
    if (!seen.insert(c.id).second) {
      throw FormatError("model file: duplicate class id " + std::to_string(c.id), record_at);
    }
    c.count = r.u32("class count");
    c.prototype_raw = get_vector(r, state.dim, "prototype");
    if (mode == CovarianceMode::kPerClass) {
      c.raw_covariance = get_packed(r, state.dim, c.count, "covariance");
    } else if (mode == CovarianceMode::kDiagonal) {
      c.raw_variances = get_vector(r, state.dim, "variances");
    }
    state.classes.push_back(std::move(c));
  }

  bool have_conf = false;
  bool have_scored = false;
  std::set<std::string> tags;
  std::vector<std::uint32_t> source_counts;
  while (!r.at_end()) {
    const std::size_t section_at = r.offset();
    const std::string tag = r.bytes(4, "section tag");
    const std::uint32_t length = r.u32("section length");
    r.require(length, "section body");
    if (!tags.insert(tag).second) {
      throw FormatError("model file: repeated section " + tag, section_at);
    }
    detail::ByteReader s(bytes.subspan(r.offset(), length), "model file section", r.offset());
    r.bytes(length, "section body");

    if (tag == "CONF") {
      ClassifierConfig& c = state.config;
      c.gamma1 = s.f64("gamma1");
      c.gamma2 = s.f64("gamma2");
      c.tukey.enabled = read_flag(s, "tukey flag");
      c.tukey.lambda = s.f64("lambda");
      c.tukey.negative_policy = read_enum<NegativePolicy>(s, "negative policy", 1);
      c.divisor = read_enum<Divisor>(s, "divisor", 1);
      c.prototype_order = read_enum<PrototypeOrder>(s, "prototype order", 1);
      c.scoring = read_enum<ScoringPrecision>(s, "scoring precision", 1);
      c.log_det_correction = read_flag(s, "log-det flag");
      state.tukey_bypassed = read_flag(s, "bypass flag");
      state.injected = read_flag(s, "injected flag");
      have_conf = true;
    } else if (tag == "SRCN") {
      while (!s.at_end()) source_counts.push_back(s.u32("sample count"));
    } else if (tag == "COMN") {
      state.common_classes = s.u32("common class count");
      state.common_raw = get_packed(s, state.dim, 0, "common covariance");
    } else if (tag == "PSCR") {
      for (auto& c : state.classes) c.prototype_scored = get_vector(s, state.dim, "prototype");
      have_scored = true;
    } else if (tag == "TLOG") {
      const std::uint32_t tasks = s.u32("task count");
      for (std::uint32_t t = 0; t < tasks; ++t) {
        TaskRecord rec;
        rec.task_index = s.u32("task index");
        const std::uint32_t n = s.u32("task class count");
        s.require(4ull * n, "task classes");
        for (std::uint32_t k = 0; k < n; ++k) rec.class_ids.push_back(s.u32("class id"));
        rec.reseen_classes = s.u32("re-seen class count");
        state.task_log.push_back(std::move(rec));
      }
    } else {
      throw FormatError("model file: unknown section '" + tag + "'", section_at);
    }
    if (!s.at_end()) {
      throw FormatError("model file: section " + tag + " has " + std::to_string(s.remaining()) +
                            " unread bytes",
                        s.offset());
    }
  }
  if (!have_conf) throw FormatError("model file: missing CONF section", r.offset());

  const std::size_t expected_counts = (mode == CovarianceMode::kPerClass ? state.classes.size() : 0) +
                                      (state.common_raw ? 1 : 0);
  if (source_counts.size() != expected_counts) {
    throw FormatError("model file: SRCN section holds " + std::to_string(source_counts.size()) +
                          " counts, expected " + std::to_string(expected_counts),
                      r.offset());
  }
  std::size_t next = 0;
  if (mode == CovarianceMode::kPerClass) {
    for (auto& c : state.classes) {
      c.raw_covariance = with_source_count(*c.raw_covariance, source_counts[next++]);
    }
  }
  if (state.common_raw) {
    state.common_raw = with_source_count(*state.common_raw, source_counts[next]);
  }

  const bool needs_scored = state.injected ||
                            state.config.prototype_order == PrototypeOrder::kMeanOfTransformed;
  if (needs_scored && !have_scored) {
    throw FormatError("model file: missing PSCR section", r.offset());
  }
  if (!needs_scored) {
    TukeyConfig tukey = state.config.tukey;
    if (state.tukey_bypassed) tukey.enabled = false;
    for (auto& c : state.classes) c.prototype_scored = tukey_vector(c.prototype_raw, tukey);
  }
  return FeCAMModel::restore(std::move(state));
}

void save_model(const std::filesystem::path& path, const FeCAMModel& model) {
  detail::write_file_bytes(path.string(), serialize_model(model));
}

FeCAMModel load_model(const std::filesystem::path& path) {
  return deserialize_model(detail::read_file_bytes(path.string()));
}

}  // namespace fecam
