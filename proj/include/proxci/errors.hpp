#pragma once

#include <stdexcept>
#include <string>

namespace proxci {

/// Input data or configuration violates a documented precondition.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical solve failed (non-convergence, ill-conditioning, divergence).
class SolverError : public std::runtime_error {
public:
  explicit SolverError(const std::string& what, double diagnostic = 0.0)
      : std::runtime_error(what), diagnostic_(diagnostic) {}

  /// Context-dependent scalar: condition estimate or final residual norm.
  double diagnostic() const { return diagnostic_; }

private:
  double diagnostic_;
};

/// A causal quantity is not identified from the supplied law or data.
class IdentificationError : public std::runtime_error {
public:
  explicit IdentificationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace proxci
