#include "proxci/inference.hpp"

#include <cmath>

#include "proxci/stats.hpp"

namespace proxci {

VectorXd mean_score(const EstimatingStack& stack, const VectorXd& phi) {
  VectorXd acc = VectorXd::Zero(stack.dim);
  VectorXd s(stack.dim);
  for (Index i = 0; i < stack.n_obs; ++i) {
    stack.score(i, phi, s);
    acc += s;
  }
  return acc / static_cast<double>(stack.n_obs);
}

MatrixXd sandwich_variance(const EstimatingStack& stack, const VectorXd& phi_hat) {
  if (phi_hat.size() != stack.dim) {
    throw ValidationError("parameter vector does not match stack dimension");
  }
  const double fitted = mean_score(stack, phi_hat).lpNorm<Eigen::Infinity>();
  if (!(fitted <= 1e-8)) {
    throw ValidationError("stack is not fitted: mean score sup-norm " + std::to_string(fitted));
  }

  const Index d = stack.dim;
  MatrixXd bread(d, d);
  VectorXd phi = phi_hat;
  for (Index j = 0; j < d; ++j) {
    const double step = 1e-6 * std::max(1.0, std::abs(phi_hat(j)));
    phi(j) = phi_hat(j) + step;
    const VectorXd up = mean_score(stack, phi);
    phi(j) = phi_hat(j) - step;
    const VectorXd down = mean_score(stack, phi);
    phi(j) = phi_hat(j);
    bread.col(j) = (up - down) / (2.0 * step);
  }

  MatrixXd meat = MatrixXd::Zero(d, d);
  VectorXd s(d);
  for (Index i = 0; i < stack.n_obs; ++i) {
    stack.score(i, phi_hat, s);
    meat.noalias() += s * s.transpose();
  }
  meat /= static_cast<double>(stack.n_obs);

  Eigen::JacobiSVD<MatrixXd> svd(bread, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond =
      sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond < 1e12)) {
    throw SolverError("singular bread matrix in sandwich variance (condition " +
                          std::to_string(cond) + ")",
                      cond);
  }
  const MatrixXd bread_inv = svd.solve(MatrixXd::Identity(d, d));
  MatrixXd cov = bread_inv * meat * bread_inv.transpose() / static_cast<double>(stack.n_obs);
  // enforce exact symmetry lost to floating-point round-off
  cov = 0.5 * (cov + cov.transpose()).eval();
  return cov;
}

std::pair<double, double> wald_interval(double estimate, double std_err) {
  if (!(std_err >= 0.0)) throw ValidationError("standard error must be nonnegative");
  return {estimate - kZCritical975 * std_err, estimate + kZCritical975 * std_err};
}

}  // namespace proxci
