#pragma once

#include <string>

namespace fecam {

/// Shortest "%.17g"-style rendering that parses back to the same double.
std::string format_number(double value);

}  // namespace fecam
