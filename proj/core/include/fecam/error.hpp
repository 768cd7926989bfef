#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fecam {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (feature dimension, matrix size, label count).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument values: non-finite data, negative hyperparameters,
/// out-of-domain transform inputs.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A covariance was passed to an operation that expects another stage.
class StageError : public Error {
 public:
  using Error::Error;
};

/// Conditioning could not proceed, e.g. a nonpositive variance.
class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, std::size_t dimension)
      : Error(what), dimension_(dimension) {}

  std::size_t dimension() const noexcept { return dimension_; }

 private:
  std::size_t dimension_;
};

/// The matrix is not numerically positive definite.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file contents.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Unknown keys or unparsable values in a run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Infeasible protocol setup or an error raised while running a task.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace fecam
