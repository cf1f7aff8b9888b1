#pragma once

#include <stdexcept>
#include <string>

namespace lidsn {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or extent mismatch between operands, or between a snapshot and a config.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A computation produced (or was fed) a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data (files, epoch sets, splits).
class DataError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrc {
  bad_magic,
  unsupported_version,
  truncated,
  label_out_of_range,
  invalid_dimensions,
  invalid_sampling_rate,
  trailing_bytes,
  non_finite_value,
  unknown_parameter,
  io_failure,
};

const char* to_string(FormatErrc code);

/// Binary file decode failure. `code()` identifies which check rejected the file.
class FormatError : public DataError {
 public:
  FormatError(FormatErrc code, const std::string& detail)
      : DataError(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

  FormatErrc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  FormatErrc code_;
  std::string detail_;
};

}  // namespace lidsn
