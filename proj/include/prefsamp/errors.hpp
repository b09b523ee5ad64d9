#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace prefsamp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or vector dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the support of the function (non-finite, non-positive rate, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (window too long, base >= cutoff, bad mechanism...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Messages name the offending row, column or day.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Operation called on an object in the wrong state (no draws, wrong model variant).
class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A sampler block produced a non-finite state.
class NumericalError : public Error {
 public:
  NumericalError(std::int64_t iteration, std::string block)
      : Error("non-finite state in block '" + block + "' at iteration " +
              std::to_string(iteration)),
        iteration_(iteration),
        block_(std::move(block)) {}

  std::int64_t iteration() const { return iteration_; }
  const std::string& block() const { return block_; }

 private:
  std::int64_t iteration_;
  std::string block_;
};

}  // namespace prefsamp
