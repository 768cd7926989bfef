#pragma once

#include "fecam/types.hpp"

#include <cstdint>
#include <string_view>

namespace fecam {

/// What to do with negative entries when lambda != 0.
enum class NegativePolicy : std::uint8_t {
  kError = 0,   // throw InputError
  kBypass = 1,  // leave the batch untransformed and report it
};

std::string_view to_string(NegativePolicy policy);

/// Tukey's ladder of powers: x^lambda for lambda != 0, log(x) for lambda == 0.
struct TukeyConfig {
  double lambda = 0.5;
  bool enabled = true;
  NegativePolicy negative_policy = NegativePolicy::kError;

  friend bool operator==(const TukeyConfig&, const TukeyConfig&) = default;
};

struct TukeyResult {
  RowMatrix values;
  bool bypassed = false;  // negative input under NegativePolicy::kBypass
};

/// Elementwise power transform of a feature batch. Returns the input
/// unchanged when disabled or when lambda == 1.
TukeyResult tukey(const RowMatrix& features, const TukeyConfig& config);

/// Same transform applied to a single vector (e.g. a prototype). Negative
/// entries are always an error here.
Vector tukey_vector(const Vector& values, const TukeyConfig& config);

/// True when `tukey` would reject or bypass this batch.
bool tukey_domain_violation(const RowMatrix& features, const TukeyConfig& config);

}  // namespace fecam
