#pragma once

#include <stdexcept>
#include <string>

namespace proxyctl {

struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionError : InvalidInputError {
  using InvalidInputError::InvalidInputError;
};

struct NotPsdError : InvalidInputError {
  using InvalidInputError::InvalidInputError;
};

struct UnderIdentifiedError : InvalidInputError {
  using InvalidInputError::InvalidInputError;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Carries the 1-based row/column of the offending CSV cell.
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t row, std::size_t col)
      : std::runtime_error(msg + " (row " + std::to_string(row) + ", column " +
                           std::to_string(col) + ")"),
        row(row),
        col(col) {}
  std::size_t row;
  std::size_t col;
};

}  // namespace proxyctl
