#pragma once

#include <Eigen/Dense>

#include "proxci/dataset.hpp"

namespace proxci {

/// Ill-conditioning threshold above which a moment system is rejected
/// instead of being silently regularized.
inline constexpr double kConditionLimit = 1e12;

/// Treatment-bridge convergence: sup-norm of the empirical moment residual.
inline constexpr double kMomentTol = 1e-9;

/// Linear moment-equation fit of the outcome confounding bridge h.
/// h(row) = dot(coef, design row built from `layout`).
struct OutcomeBridgeFit {
  VectorXd coef;
  TermLayout layout;
  TermLayout instrument_layout;
  double gram_condition = 0.0;
  double residual_moment_norm = 0.0;
  bool att_form = false;  // fitted on controls only, no A terms
};

/// Root of the nonlinear treatment-bridge moment equation.
/// ATE form: q = 1 + exp{(-1)^{1-A} eta}; ATT form: q = exp{eta}, eta the
/// linear predictor over `layout`. q > 1 (ATE) resp. q > 0 (ATT) everywhere.
struct TreatmentBridgeFit {
  VectorXd coef;
  TermLayout layout;
  TermLayout target_layout;
  int iterations = 0;
  double final_residual_norm = 0.0;
  bool converged = false;
  bool att_form = false;
};

/// Solves the empirical moment system mean{[Y - h(W,A,X;b)] u(Z,A,X)} = 0 for
/// b, with u built from instrument_layout. Exactly identified systems are
/// solved directly; over-identified ones as the identity-weighted
/// least-squares minimizer. Throws SolverError when the moment matrix
/// condition exceeds kConditionLimit, ValidationError on dimension errors.
OutcomeBridgeFit fit_outcome_bridge(const ProxyDataset& data, const TermLayout& h_layout,
                                    const TermLayout& instrument_layout);

/// Control-group variant: mean{(1-A)[Y - h(W,X;b)] u(Z,X)} = 0.
OutcomeBridgeFit fit_att_outcome_bridge(const ProxyDataset& data, const TermLayout& h_layout,
                                        const TermLayout& instrument_layout);

/// Solves mean{(-1)^{1-A} q(Z,A,X;t) m(W,A,X) - [m(W,1,X) - m(W,0,X)]} = 0
/// by damped Newton with analytic Jacobian, falling back to
/// Levenberg-Marquardt on stagnation. The target dimension must equal the
/// coefficient dimension. For the default target (1, W, A, X) the subtracted
/// term is the constant unit vector in the A position.
TreatmentBridgeFit fit_treatment_bridge(const ProxyDataset& data, const TermLayout& q_layout,
                                        const TermLayout& target_layout);

/// Control-odds variant: mean{[(1-A) q(Z,X;t) - A] m(W,X)} = 0, q = exp{eta}.
TreatmentBridgeFit fit_att_treatment_bridge(const ProxyDataset& data, const TermLayout& q_layout,
                                            const TermLayout& target_layout);

/// h evaluated per observation; a_override substitutes the treatment value.
VectorXd eval_outcome_bridge(const ProxyDataset& data, const OutcomeBridgeFit& fit,
                             std::optional<double> a_override = std::nullopt);

/// q evaluated per observation at the observed treatment.
VectorXd eval_treatment_bridge(const ProxyDataset& data, const TreatmentBridgeFit& fit);
VectorXd eval_treatment_bridge_at(const ProxyDataset& data, const TreatmentBridgeFit& fit,
                                  const VectorXd& coef);

/// Empirical moment residual of the defining equation at arbitrary
/// coefficients (independent re-evaluation used by the solver certificates).
VectorXd outcome_bridge_moment(const ProxyDataset& data, const OutcomeBridgeFit& fit,
                               const VectorXd& coef);
VectorXd treatment_bridge_moment(const ProxyDataset& data, const TreatmentBridgeFit& fit,
                                 const VectorXd& coef);

/// Analytic Jacobian of the treatment-bridge moment (exposed for the
/// finite-difference cross-check).
MatrixXd treatment_bridge_jacobian(const ProxyDataset& data, const TreatmentBridgeFit& fit,
                                   const VectorXd& coef);

}  // namespace proxci
