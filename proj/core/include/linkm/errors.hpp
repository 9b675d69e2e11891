#pragma once

#include <stdexcept>
#include <string>

namespace linkm {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or JSON document.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Input violates a precondition (curves intersect, bad motion, unknown preset, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Evaluation point lies on (or numerically indistinguishable from) a source curve.
class SingularPointError : public Error {
 public:
  using Error::Error;
};

/// A deterministic quadrature or rounding check failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Field-line integration left its tube or never returned.
class TraceError : public Error {
 public:
  TraceError(const std::string& what, double drift) : Error(what), drift_(drift) {}
  double drift() const noexcept { return drift_; }

 private:
  double drift_;
};

}  // namespace linkm
