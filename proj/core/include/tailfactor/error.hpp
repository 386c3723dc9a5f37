#pragma once

#include <stdexcept>
#include <string>

namespace tailfactor {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument, configuration value, or out-of-range parameter.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (parse failures, incomplete grids,
/// duplicate keys, non-finite values).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a stream or file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure cannot proceed: infeasible constraint sets,
/// rank-deficient factors, logarithms of nonpositive order statistics.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace tailfactor
