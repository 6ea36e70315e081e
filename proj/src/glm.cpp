#include "proxci/glm.hpp"

#include <cmath>

namespace proxci {

namespace {

double expit(double v) { return 1.0 / (1.0 + std::exp(-v)); }

constexpr double kProbClamp = 1e-12;

}  // namespace

GlmFit glm_fit(const VectorXd& response, const MatrixXd& design, GlmKind kind) {
  if (response.size() != design.rows()) {
    throw ValidationError("response and design row counts differ");
  }
  if (design.rows() < design.cols()) {
    throw ValidationError("fewer observations than coefficients");
  }

  GlmFit fit;
  fit.kind = kind;

  if (kind == GlmKind::Linear) {
    const MatrixXd gram = design.transpose() * design;
    const VectorXd rhs = design.transpose() * response;
    fit.coefficients = gram.ldlt().solve(rhs);
    if (!fit.coefficients.allFinite() ||
        (gram * fit.coefficients - rhs).lpNorm<Eigen::Infinity>() >
            1e-6 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
      throw SolverError("singular normal equations in linear fit");
    }
    fit.converged = true;
    fit.iterations = 1;
    return fit;
  }

  constexpr int kMaxIter = 100;
  constexpr double kTol = 1e-10;
  const Index k = design.cols();
  VectorXd beta = VectorXd::Zero(k);
  for (int iter = 1; iter <= kMaxIter; ++iter) {
    const VectorXd eta = design * beta;
    VectorXd prob(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
      prob(i) = std::clamp(expit(eta(i)), kProbClamp, 1.0 - kProbClamp);
    }
    MatrixXd hess = MatrixXd::Zero(k, k);
    for (Index i = 0; i < design.rows(); ++i) {
      hess.noalias() += prob(i) * (1.0 - prob(i)) * design.row(i).transpose() * design.row(i);
    }
    const VectorXd grad = design.transpose() * (response - prob);
    const VectorXd delta = hess.ldlt().solve(grad);
    if (!delta.allFinite()) {
      fit.coefficients = beta;
      fit.iterations = iter;
      fit.converged = false;
      return fit;
    }
    beta += delta;
    if (delta.lpNorm<Eigen::Infinity>() <= kTol) {
      fit.coefficients = beta;
      fit.iterations = iter;
      fit.converged = true;
      return fit;
    }
  }
  fit.coefficients = beta;
  fit.iterations = kMaxIter;
  fit.converged = false;
  return fit;
}

VectorXd glm_predict(const GlmFit& fit, const MatrixXd& design) {
  VectorXd eta = design * fit.coefficients;
  if (fit.kind == GlmKind::Linear) return eta;
  for (Index i = 0; i < eta.size(); ++i) {
    eta(i) = std::clamp(expit(eta(i)), kProbClamp, 1.0 - kProbClamp);
  }
  return eta;
}

}  // namespace proxci
