#pragma once

#include <stdexcept>
#include <string>

namespace gomkit {

/// Base class of every error raised by the toolkit. `kind()` is a short
/// machine-readable category used by the CLI error line.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

/// Malformed input: files, topology documents, channel sets.
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error("validation", what) {}
};

/// Dimension or length mismatch between arguments.
class ShapeError : public Error {
public:
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

/// Non-finite values, singular variances, divergent rollouts.
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what) : Error("numerical", what) {}
};

/// Lookup of a class label, channel or joint that does not exist.
class NotFoundError : public Error {
public:
  explicit NotFoundError(const std::string& what) : Error("not_found", what) {}
};

} // namespace gomkit
