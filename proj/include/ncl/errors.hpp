#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ncl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input files, arguments or configuration. The CLI maps these to exit code 2.
struct InputError : Error {
  using Error::Error;
};

struct ParseError : InputError {
  ParseError(std::size_t line, const std::string& what)
      : InputError("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

struct EmptyDatasetError : InputError {
  using InputError::InputError;
};

struct ConfigError : InputError {
  using InputError::InputError;
};

struct UndefinedMetricError : Error {
  using Error::Error;
};

struct SizingError : Error {
  using Error::Error;
};

// Matrix failed to factor; `pivot` is the first non-positive pivot.
struct NumericalDomainError : Error {
  NumericalDomainError(long pivot, const std::string& what)
      : Error(what + " (pivot " + std::to_string(pivot) + ")"), pivot(pivot) {}
  long pivot;
};

struct DivergenceError : Error {
  DivergenceError(int epoch, long batch)
      : Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
              std::to_string(batch)),
        epoch(epoch),
        batch(batch) {}
  int epoch;
  long batch;
};

}  // namespace ncl
