#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace openstreets {

enum class ErrorCode {
  MissingColumn,
  BadValue,
  DuplicateSegmentId,
  UnknownSegmentId,
  EmptyNetwork,
  UnknownIntersection,
  NoPath,
  NoCarsToReroute,
  NoAlternativePath,
  InstanceTooLarge,
  Disconnected,
  SingularSystem,
  DimensionMismatch,
  LengthMismatch,
  ShapeMismatch,
  MissingDay,
  EmptyDataset,
  Diverged,
  NoValidActions,
  EmptyBatch,
  ScenarioUnsupported,
  BadCheckpoint,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Validation and contract failures raised by every module. The CLI maps these
/// to exit code 1; anything else escaping is treated as an internal error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// BadValue carries the 1-based data row (header excluded) and the column name.
class BadValueError : public Error {
 public:
  BadValueError(std::size_t row, std::string column, const std::string& detail)
      : Error(ErrorCode::BadValue,
              "row " + std::to_string(row) + ", column '" + column + "': " + detail),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

}  // namespace openstreets
