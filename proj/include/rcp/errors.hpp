#pragma once

#include <stdexcept>
#include <string>

namespace rcp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset or split too small for the requested operation.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Dimension mismatch between vectors, matrices or network layers.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument outside the other categories.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Non-finite input or failed numerical routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Value outside the admissible domain of an adjustment family.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, double recommended_shift = 0.0)
      : Error(what), recommended_shift_(recommended_shift) {}

  /// Uniform score shift that would bring the offending scores into the domain,
  /// or 0 when no shift can fix the violation.
  double recommended_shift() const noexcept { return recommended_shift_; }

 private:
  double recommended_shift_;
};

/// Matrix that should be symmetric positive definite is not.
class DecompositionError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Calibration could not produce a valid model.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Network training diverged.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Malformed CSV, config or binary container.
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rcp
