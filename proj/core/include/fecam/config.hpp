#pragma once

#include "fecam/classifier.hpp"
#include "fecam/protocol.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fecam {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Everything needed to reproduce a protocol run. Serialized as flat
/// `key=value` lines; unknown keys are rejected.
struct RunConfig {
  ClassifierConfig classifier;
  ProtocolConfig protocol;
  std::string train_path;
  std::string test_path;
  std::string report_path;
  std::string csv_path;
  std::size_t threads = 0;

  /// Applies one setting. Throws ConfigError for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);

  /// All settings in a fixed order.
  KeyValues to_pairs() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Every key accepted by RunConfig::set.
const std::vector<std::string_view>& config_keys();

/// Parses `key=value` lines on top of `base`. Blank lines and lines
/// starting with '#' are skipped.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Recovers the configuration echoed into an EvalReport (`config.` lines).
RunConfig config_from_report(std::string_view report_text);

/// Classifier settings under the same keys RunConfig uses.
KeyValues classifier_echo(const ClassifierConfig& config);

CovarianceMode parse_mode(std::string_view text);

}  // namespace fecam
