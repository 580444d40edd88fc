#pragma once

#include <stdexcept>
#include <string>

namespace reid {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input, detected before any computation starts.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Input was well-formed but the requested computation cannot produce a result.
class ComputationError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrc {
  io,
  bad_magic,
  version_mismatch,
  truncated,
  trailing_bytes,
  count_mismatch,
  non_finite,
  schema,
};

/// Binary/CSV container errors. `code()` distinguishes the failure kind.
class FormatError : public ValidationError {
 public:
  FormatError(FormatErrc code, const std::string& what)
      : ValidationError(what), code_(code) {}

  FormatErrc code() const noexcept { return code_; }

 private:
  FormatErrc code_;
};

}  // namespace reid
