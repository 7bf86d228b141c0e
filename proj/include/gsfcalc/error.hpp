#pragma once

#include <stdexcept>
#include <string>

namespace gsfc {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands live on different gauges.
class GaugeMismatch : public Error {
 public:
  GaugeMismatch() : Error("gauge mismatch") {}
};

/// A point or interval lies outside the domain of a family.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Building an object (gauge, family, kernel, metric) failed validation.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// A numerical solver did not converge or hit a singular system.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// The ε-samples of a generalized number show no detectable limit.
class NoStandardPart : public Error {
 public:
  explicit NoStandardPart(const std::string& why) : Error("no standard part: " + why) {}
};

}  // namespace gsfc
