#pragma once

#include <stdexcept>
#include <string>

namespace gyrolatent {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a function branch (inverse trig, chart).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Mismatched curvature, dimension or tensor shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Vanishing denominator or projection pole.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Operation that has no meaning in the requested curvature regime.
class RegimeError : public Error {
 public:
  using Error::Error;
};

/// Degenerate geometric configuration (zero orientation, coincident vertex).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or an optimizer that cannot make a valid step.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Misuse of stateful objects, e.g. a second backward pass over one tape.
class StateError : public Error {
 public:
  using Error::Error;
};

class IngestError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gyrolatent
