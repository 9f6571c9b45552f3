#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fkmad {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (files, label vectors, dimensions).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (unknown keys, unparsable values, bad arguments).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value. `step()` is the offending
/// timestep or optimizer step, depending on where it was raised.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace fkmad
