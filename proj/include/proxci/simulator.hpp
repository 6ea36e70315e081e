#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "proxci/dataset.hpp"

namespace proxci {

/// How Pr(A=1|X) is generated. `AppendixConsistent` evaluates the closed
/// form implied by the bridge models so the working q-model is exactly
/// correct under the generated law; `PlainLogistic` uses the simple
/// [1 + exp{0.125' X}]^{-1} form. The two coincide at the default parameters.
enum class PropensityMode { AppendixConsistent, PlainLogistic };

/// Gaussian proxy data-generating mechanism. (Z, W, U) | A, X is trivariate
/// normal with mean rows (alpha, mu, kappa)'(1, A, X) and covariance sigma;
/// Y = b_0 + b_a A + b_x'X + (b_w - omega) E(W|U,X) + omega W + N(0, sigma_y^2).
struct SimConfig {
  VectorXd gamma_x = Eigen::Vector2d(0.25, 0.25);
  double sigma_x = 0.25;

  double alpha_0 = 0.25, alpha_a = 0.25;
  VectorXd alpha_x = Eigen::Vector2d(0.25, 0.25);
  double mu_0 = 0.25, mu_a = 0.125;
  VectorXd mu_x = Eigen::Vector2d(0.25, 0.25);
  double kappa_0 = 0.25, kappa_a = 0.25;
  VectorXd kappa_x = Eigen::Vector2d(0.25, 0.25);

  Eigen::Matrix3d sigma = (Eigen::Matrix3d() << 1.0, 0.25, 0.5,  //
                           0.25, 1.0, 0.5,                       //
                           0.5, 0.5, 1.0)
                              .finished();  // (Z, W, U) order

  double b_0 = 2.0, b_a = 2.0;
  VectorXd b_x = Eigen::Vector2d(0.25, 0.25);
  double b_w = 4.0, omega = 2.0;
  double sigma_y = 0.25;

  double t_0 = 0.25;
  VectorXd t_x = Eigen::Vector2d(0.25, 0.25);

  PropensityMode propensity_mode = PropensityMode::AppendixConsistent;
  Index n = 2000;
  std::uint64_t seed = 0;

  Index px() const { return gamma_x.size(); }
};

/// No-confounding variant (kappa_a = mu_a = 0, implied t_z = t_a = 0).
SimConfig no_confounding_config();
/// Weak Z-W association variant (sigma_zw = 0.15, sigma_wu = 0.3,
/// mu_a = 0.075).
SimConfig weak_zw_config();

/// Checks positive-definiteness of sigma and the two compatibility
/// constraints sigma_zw sigma_u^2 = sigma_wu sigma_zu and
/// mu_a sigma_u^2 = sigma_wu kappa_a, each to 1e-10.
void validate_config(const SimConfig& config);

/// Quantities implied by the mechanism: the Z | U, A, X regression, the two
/// conditional variances, and the true treatment-bridge coefficients.
struct DerivedParams {
  double theta_0 = 0.0, theta_a = 0.0, theta_u = 0.0;
  VectorXd theta_x;
  double var_z_given_uax = 0.0;
  double var_u_given_wax = 0.0;
  double t_0 = 0.0, t_z = 0.0, t_a = 0.0;
  VectorXd t_x;
  double psi_true = 0.0;  // equals b_a
};
DerivedParams derive_params(const SimConfig& config, double t_0, const VectorXd& t_x);

/// Draws a dataset; deterministic given (config, seed). The latent U column
/// is retained on the dataset for oracle checks.
ProxyDataset simulate(const SimConfig& config);

enum class Misspec { None, WStar3, ZStar3, BothStar1 };
Misspec parse_misspec(const std::string& name);

/// Returns a copy with proxy columns transformed (|v|^{1/2} + shift);
/// untouched columns are bit-identical.
ProxyDataset misspecify(const ProxyDataset& data, Misspec which);

/// Mechanism that violates the proxy conditional independences
/// (Z enters W structurally and U interacts with A in the outcome);
/// the true ATE is 0.5. The latent U column is retained.
struct ViolationConfig {
  Index n = 2000;
  std::uint64_t seed = 0;
};
ProxyDataset simulate_violation(const ViolationConfig& config);

/// One splitmix64 round; the replication-seed mixer.
std::uint64_t splitmix64(std::uint64_t state);
/// Order-insensitive per-replication seed stream.
std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t replication);

}  // namespace proxci
