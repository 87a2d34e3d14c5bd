#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace malab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Collinear projections, zero-area polygons and similar geometric degeneracies.
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold for the given input.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Two objects that must share a node set or sample set do not.
class MismatchError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what + " (last residual " + std::to_string(last_residual) + ")"),
        last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// The Newton system could not be factorized even after regularization.
class SingularJacobian : public Error {
 public:
  SingularJacobian(const std::string& what, std::size_t node)
      : Error(what + " (degenerate node " + std::to_string(node) + ")"), node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace malab
