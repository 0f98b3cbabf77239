#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace carl {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A precondition on argument values was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// An object was used in a state that forbids the call (e.g. a consumed tape).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data (CIFAR records, checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint written by an incompatible format version.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Bad run configuration; carries the 1-based line number when known (0 otherwise).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Training produced a non-finite loss.
class DivergedError : public Error {
 public:
  DivergedError(std::size_t epoch, std::size_t batch_index)
      : Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
              ", batch " + std::to_string(batch_index)),
        epoch_(epoch),
        batch_index_(batch_index) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch_index() const noexcept { return batch_index_; }

 private:
  std::size_t epoch_;
  std::size_t batch_index_;
};

}  // namespace carl
