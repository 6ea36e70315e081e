#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>

#include "proxci/errors.hpp"

namespace proxci {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Stacked per-observation estimating equations H(observation, phi) whose
/// empirical mean vanishes at the fitted parameter vector.
struct EstimatingStack {
  Index dim = 0;
  Index n_obs = 0;
  /// Writes the dim-vector score of observation i at phi into `out`.
  std::function<void(Index i, const VectorXd& phi, VectorXd& out)> score;
};

/// Empirical sandwich covariance (1/n) A^{-1} B A^{-T} with bread
/// A = mean{dH/dphi'} by central finite differences (step 1e-6*max(1,|phi_j|))
/// and meat B = mean{H H'}. Requires the stack to be fitted:
/// sup-norm of the mean score at phi_hat must not exceed 1e-8.
/// Throws SolverError when the bread matrix is singular.
MatrixXd sandwich_variance(const EstimatingStack& stack, const VectorXd& phi_hat);

/// Mean score over observations (exposed for fit certificates and tests).
VectorXd mean_score(const EstimatingStack& stack, const VectorXd& phi);

/// 95% Wald interval: estimate -/+ 1.959964 * se. Requires se >= 0.
std::pair<double, double> wald_interval(double estimate, double std_err);

}  // namespace proxci
