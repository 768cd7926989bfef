#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fecam {

using ClassId = std::uint32_t;
using DomainId = std::uint32_t;

/// Row-major batch of embedding vectors, one row per sample.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// A labelled batch of D-dimensional embeddings. `domains` is either empty
/// or has one entry per row.
struct FeatureMatrix {
  RowMatrix values;
  std::vector<ClassId> labels;
  std::vector<DomainId> domains;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }

  /// Throws DimensionError when labels/domains disagree with the row count.
  void validate() const;

  /// Copies the given rows (in order) into a new batch.
  FeatureMatrix select(std::span<const std::size_t> rows) const;
};

/// Throws InputError if any entry is NaN or infinite.
void require_finite(const RowMatrix& values, const char* what);

}  // namespace fecam
