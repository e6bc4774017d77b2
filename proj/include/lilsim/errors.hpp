#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lilsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (ranges, missing keys, model constants).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A grid or index map does not reach the requested time or index.
class HorizonError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Contract misuse (calling an operation that is not defined for the object).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered in a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A scheme step failed. Carries the step index and the last residual.
class StepError : public Error {
 public:
  StepError(const std::string& what, std::uint64_t step, double residual)
      : Error(what), step_(step), residual_(residual) {}

  std::uint64_t step() const noexcept { return step_; }
  double residual() const noexcept { return residual_; }

 private:
  std::uint64_t step_;
  double residual_;
};

}  // namespace lilsim
