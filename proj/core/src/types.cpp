#include "fecam/types.hpp"

#include "fecam/error.hpp"

#include <cmath>
#include <string>

namespace fecam {

void FeatureMatrix::validate() const {
  if (labels.size() != rows()) {
    throw DimensionError("feature batch has " + std::to_string(rows()) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  if (!domains.empty() && domains.size() != rows()) {
    throw DimensionError("feature batch has " + std::to_string(rows()) + " rows but " +
                         std::to_string(domains.size()) + " domain ids");
  }
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  out.labels.reserve(rows.size());
  if (!domains.empty()) out.domains.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(r);
    out.labels.push_back(labels[rows[i]]);
    if (!domains.empty()) out.domains.push_back(domains[rows[i]]);
  }
  return out;
}

void require_finite(const RowMatrix& values, const char* what) {
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (!std::isfinite(values(r, c))) {
        throw InputError(std::string(what) + " contains a non-finite value at row " +
                         std::to_string(r) + ", column " + std::to_string(c));
      }
    }
  }
}

}  // namespace fecam
