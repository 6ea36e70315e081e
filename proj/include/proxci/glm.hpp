#pragma once

#include <Eigen/Dense>

#include "proxci/errors.hpp"

namespace proxci {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class GlmKind { Logistic, Linear };

struct GlmFit {
  VectorXd coefficients;
  GlmKind kind = GlmKind::Linear;
  bool converged = false;
  int iterations = 0;
};

/// Linear: normal equations. Logistic: iteratively reweighted least squares,
/// tolerance 1e-10 on the coefficient change, at most 100 iterations; a fit
/// that hits the cap (separation) is returned with converged == false.
GlmFit glm_fit(const VectorXd& response, const MatrixXd& design, GlmKind kind);

/// Linear predictor (Linear) or success probability (Logistic, clamped to
/// [1e-12, 1 - 1e-12]).
VectorXd glm_predict(const GlmFit& fit, const MatrixXd& design);

}  // namespace proxci
