#include "fecam/config.hpp"

#include "fecam/error.hpp"
#include "fecam/format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fecam {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) +
                    " (expected " + expected + ")");
}

double to_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(out)) {
    bad_value(key, value, "a finite number");
  }
  return out;
}

std::uint64_t to_unsigned(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value, "a nonnegative integer");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  bad_value(key, value, "true or false");
}

std::vector<DomainId> to_domain_list(std::string_view key, std::string_view value) {
  std::vector<DomainId> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    const auto item = trim(value.substr(0, comma));
    out.push_back(static_cast<DomainId>(to_unsigned(key, item)));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

std::string join_domains(const std::vector<DomainId>& domains) {
  std::string out;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(domains[i]);
  }
  return out;
}

std::string_view bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

CovarianceMode parse_mode(std::string_view text) {
  if (text == "per_class") return CovarianceMode::kPerClass;
  if (text == "common") return CovarianceMode::kCommon;
  if (text == "diagonal") return CovarianceMode::kDiagonal;
  if (text == "euclidean") return CovarianceMode::kEuclidean;
  bad_value("mode", text, "per_class, common, diagonal or euclidean");
}

const std::vector<std::string_view>& config_keys() {
  static const std::vector<std::string_view> keys = {
      "mode",
      "gamma1",
      "gamma2",
      "tukey.enabled",
      "tukey.lambda",
      "tukey.negative_policy",
      "covariance.divisor",
      "prototype.transform_order",
      "scoring.precision",
      "scoring.log_det",
      "protocol.kind",
      "protocol.initial_classes",
      "protocol.tasks",
      "protocol.classes_per_task",
      "protocol.shots",
      "protocol.domain_order",
      "protocol.seed",
      "protocol.shuffle_classes",
      "protocol.eval_scope",
      "input.train",
      "input.test",
      "output.report",
      "output.csv",
      "threads",
  };
  return keys;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  ClassifierConfig& c = classifier;
  ProtocolConfig& p = protocol;
  if (key == "mode") {
    c.mode = parse_mode(value);
  } else if (key == "gamma1" || key == "gamma2") {
    const double g = to_double(key, value);
    if (g < 0.0) bad_value(key, value, "a nonnegative number");
    (key == "gamma1" ? c.gamma1 : c.gamma2) = g;
  } else if (key == "tukey.enabled") {
    c.tukey.enabled = to_bool(key, value);
  } else if (key == "tukey.lambda") {
    c.tukey.lambda = to_double(key, value);
  } else if (key == "tukey.negative_policy") {
    if (value == "error") {
      c.tukey.negative_policy = NegativePolicy::kError;
    } else if (value == "bypass") {
      c.tukey.negative_policy = NegativePolicy::kBypass;
    } else {
      bad_value(key, value, "error or bypass");
    }
  } else if (key == "covariance.divisor") {
    if (value == "population") {
      c.divisor = Divisor::kPopulation;
    } else if (value == "unbiased") {
      c.divisor = Divisor::kUnbiased;
    } else {
      bad_value(key, value, "population or unbiased");
    }
  } else if (key == "prototype.transform_order") {
    if (value == "transform_of_mean") {
      c.prototype_order = PrototypeOrder::kTransformOfMean;
    } else if (value == "mean_of_transformed") {
      c.prototype_order = PrototypeOrder::kMeanOfTransformed;
    } else {
      bad_value(key, value, "transform_of_mean or mean_of_transformed");
    }
  } else if (key == "scoring.precision") {
    if (value == "mixed") {
      c.scoring = ScoringPrecision::kMixed;
    } else if (value == "exact") {
      c.scoring = ScoringPrecision::kExact;
    } else {
      bad_value(key, value, "mixed or exact");
    }
  } else if (key == "scoring.log_det") {
    c.log_det_correction = to_bool(key, value);
  } else if (key == "protocol.kind") {
    if (value == "mscil") {
      p.kind = ProtocolKind::kMscil;
    } else if (value == "fscil") {
      p.kind = ProtocolKind::kFscil;
    } else if (value == "dil") {
      p.kind = ProtocolKind::kDil;
    } else {
      bad_value(key, value, "mscil, fscil or dil");
    }
  } else if (key == "protocol.initial_classes") {
    p.initial_classes = to_unsigned(key, value);
  } else if (key == "protocol.tasks") {
    p.tasks = to_unsigned(key, value);
  } else if (key == "protocol.classes_per_task") {
    p.classes_per_task = to_unsigned(key, value);
  } else if (key == "protocol.shots") {
    p.shots = to_unsigned(key, value);
  } else if (key == "protocol.domain_order") {
    p.domain_order = to_domain_list(key, value);
  } else if (key == "protocol.seed") {
    p.seed = to_unsigned(key, value);
  } else if (key == "protocol.shuffle_classes") {
    p.shuffle_classes = to_bool(key, value);
  } else if (key == "protocol.eval_scope") {
    if (value == "cumulative") {
      p.eval_scope = EvalScope::kCumulative;
    } else if (value == "current_task") {
      p.eval_scope = EvalScope::kCurrentTask;
    } else {
      bad_value(key, value, "cumulative or current_task");
    }
  } else if (key == "input.train") {
    train_path = value;
  } else if (key == "input.test") {
    test_path = value;
  } else if (key == "output.report") {
    report_path = value;
  } else if (key == "output.csv") {
    csv_path = value;
  } else if (key == "threads") {
    threads = to_unsigned(key, value);
  } else {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
}

KeyValues classifier_echo(const ClassifierConfig& c) {
  return {
      {"mode", std::string(to_string(c.mode))},
      {"gamma1", format_number(c.gamma1)},
      {"gamma2", format_number(c.gamma2)},
      {"tukey.enabled", std::string(bool_text(c.tukey.enabled))},
      {"tukey.lambda", format_number(c.tukey.lambda)},
      {"tukey.negative_policy", std::string(to_string(c.tukey.negative_policy))},
      {"covariance.divisor", c.divisor == Divisor::kPopulation ? "population" : "unbiased"},
      {"prototype.transform_order", std::string(to_string(c.prototype_order))},
      {"scoring.precision", std::string(to_string(c.scoring))},
      {"scoring.log_det", std::string(bool_text(c.log_det_correction))},
  };
}

KeyValues RunConfig::to_pairs() const {
  KeyValues out = classifier_echo(classifier);
  const ProtocolConfig& p = protocol;
  out.emplace_back("protocol.kind", std::string(to_string(p.kind)));
  out.emplace_back("protocol.initial_classes", std::to_string(p.initial_classes));
  out.emplace_back("protocol.tasks", std::to_string(p.tasks));
  out.emplace_back("protocol.classes_per_task", std::to_string(p.classes_per_task));
  out.emplace_back("protocol.shots", std::to_string(p.shots));
  out.emplace_back("protocol.domain_order", join_domains(p.domain_order));
  out.emplace_back("protocol.seed", std::to_string(p.seed));
  out.emplace_back("protocol.shuffle_classes", std::string(bool_text(p.shuffle_classes)));
  out.emplace_back("protocol.eval_scope", std::string(to_string(p.eval_scope)));
  out.emplace_back("input.train", train_path);
  out.emplace_back("input.test", test_path);
  out.emplace_back("output.report", report_path);
  out.emplace_back("output.csv", csv_path);
  out.emplace_back("threads", std::to_string(threads));
  return out;
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto newline = text.find('\n');
    const std::string_view line = trim(text.substr(0, newline));
    text = newline == std::string_view::npos ? std::string_view{} : text.substr(newline + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), std::move(base));
}

RunConfig config_from_report(std::string_view report_text) {
  constexpr std::string_view kPrefix = "config.";
  std::string filtered;
  while (!report_text.empty()) {
    const auto newline = report_text.find('\n');
    const std::string_view line = report_text.substr(0, newline);
    report_text =
        newline == std::string_view::npos ? std::string_view{} : report_text.substr(newline + 1);
    if (line.starts_with(kPrefix)) {
      filtered.append(line.substr(kPrefix.size()));
      filtered.push_back('\n');
    }
  }
  return parse_run_config(filtered);
}

std::string format_number(double value) {
  char buffer[32];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buffer, sizeof(buffer), "%.*g", precision, value);
    double parsed = 0.0;
    std::from_chars(buffer, buffer + std::char_traits<char>::length(buffer), parsed);
    if (parsed == value) break;
  }
  return buffer;
}

}  // namespace fecam
