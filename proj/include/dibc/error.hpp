#pragma once

#include <stdexcept>
#include <string>

namespace dibc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Distribution or model parameter outside its domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Factorization failure or non-finite arithmetic.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (flags, manifests, pipeline settings).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File system or parse failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Message delivery failure or protocol violation between master and worker.
class TransportError : public Error {
 public:
  using Error::Error;
};

enum class ErrorCategory : unsigned char { kOther = 0, kParameter, kNumerical, kConfig, kIo, kTransport };

/// Category of an exception, kOther for anything outside the hierarchy.
ErrorCategory categorize(const std::exception& e);

/// Rebuilds an exception of the given category.
[[noreturn]] void throw_categorized(ErrorCategory category, const std::string& what);

/// Failure of one pipeline step; `category` is that of the root cause.
class PipelineError : public Error {
 public:
  PipelineError(std::string step, ErrorCategory category, const std::string& what)
      : Error(step + ": " + what), step_(std::move(step)), category_(category) {}
  [[nodiscard]] const std::string& step() const { return step_; }
  [[nodiscard]] ErrorCategory category() const { return category_; }

 private:
  std::string step_;
  ErrorCategory category_;
};

}  // namespace dibc
