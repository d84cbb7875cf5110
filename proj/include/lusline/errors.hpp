#pragma once

#include <stdexcept>
#include <string>

namespace lusline {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A function argument violates its precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A raster file could not be read or decoded.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// An input carries no usable content (e.g. an all-zero frame).
class NoContentError : public Error {
 public:
  using Error::Error;
};

/// The proximal operator is not single-valued for the given parameters.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Solver or pipeline parameters are inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during an iterative computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A detection stage could not produce its required output.
class DetectionError : public Error {
 public:
  using Error::Error;
};

}  // namespace lusline
