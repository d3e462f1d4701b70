#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace edanni {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Base of all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A generation/run spec violates one of its invariants (maps to CLI exit 2).
class InvalidSpecError : public Error {
 public:
  explicit InvalidSpecError(const std::string& msg) : Error(msg) {}
};

class InvalidConfigError : public Error {
 public:
  explicit InvalidConfigError(const std::string& msg) : Error(msg) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// A condition was requested that the inputs cannot support
// (e.g. a linear-rate check on a problem with no strong convexity).
class InapplicableError : public Error {
 public:
  explicit InapplicableError(const std::string& msg) : Error(msg) {}
};

// Iterative solve ran out of iterations; carries the best iterate seen.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, Vector best, double residual,
                   long iterations)
      : Error(msg),
        best_iterate(std::move(best)),
        achieved_residual(residual),
        iterations(iterations) {}

  Vector best_iterate;
  double achieved_residual;
  long iterations;
};

// The asynchronous protocol broke one of its own guarantees (a bug, not
// a user error); aborts the run.
class ProtocolViolationError : public Error {
 public:
  explicit ProtocolViolationError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace edanni
