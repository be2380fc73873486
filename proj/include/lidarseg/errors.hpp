#pragma once

#include <stdexcept>
#include <string>

namespace lidarseg {

/// Base for all data-dependent failures (CLI maps these to exit code 2).
class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string &msg) : std::runtime_error(msg) {}
};

/// Malformed or truncated file contents. Message names the byte offset.
class FormatError : public DataError {
  public:
    using DataError::DataError;
};

/// Inputs that are individually valid but mutually inconsistent
/// (e.g. label count != point count).
class ConsistencyError : public DataError {
  public:
    using DataError::DataError;
};

/// Geometry too degenerate to fit (all RANSAC samples collinear, < 3 points).
class DegenerateGeometryError : public DataError {
  public:
    using DataError::DataError;
};

/// Synthetic scene placement failed after bounded retries.
class GenerationError : public DataError {
  public:
    using DataError::DataError;
};

/// Training aborted on a non-finite loss.
class TrainingDivergedError : public DataError {
  public:
    using DataError::DataError;
};

} // namespace lidarseg
