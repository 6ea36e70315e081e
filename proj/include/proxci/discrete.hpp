#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "proxci/errors.hpp"

namespace proxci {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Joint probability tensor over finite (U, X, W, Z, A, Y), stored flat in
/// row-major (u, x, w, z, a, y) order. Entries sum to one. Laws produced by
/// make_structured_law satisfy W independent of (Z, A) given (U, X) and
/// Y independent of Z given (U, A, X) by construction.
struct CategoricalLaw {
  std::array<Index, 6> dims{};  // d_u, d_x, d_w, d_z, 2, d_y
  std::vector<double> prob;
  std::vector<double> y_values;  // numeric value per Y category

  Index d_u() const { return dims[0]; }
  Index d_x() const { return dims[1]; }
  Index d_w() const { return dims[2]; }
  Index d_z() const { return dims[3]; }
  Index d_y() const { return dims[5]; }

  double& at(Index u, Index x, Index w, Index z, Index a, Index y);
  double at(Index u, Index x, Index w, Index z, Index a, Index y) const;

  /// Checks shape, nonnegativity, and unit total mass (1e-12).
  void check() const;
};

/// Observable margin: tensor over (x, w, z, a, y) in row-major order.
struct ObservableLaw {
  std::array<Index, 5> dims{};  // d_x, d_w, d_z, 2, d_y
  std::vector<double> prob;
  std::vector<double> y_values;

  Index d_x() const { return dims[0]; }
  Index d_w() const { return dims[1]; }
  Index d_z() const { return dims[2]; }
  Index d_y() const { return dims[4]; }

  double& at(Index x, Index w, Index z, Index a, Index y);
  double at(Index x, Index w, Index z, Index a, Index y) const;
  /// Pr(x) margin.
  VectorXd x_weights() const;
};

ObservableLaw marginalize_u(const CategoricalLaw& law);

/// Builds the joint from conditional components:
///   p_x[x], p_u_given_x(u, x), p_a_given_ux(a | u, x) as Pr(A=1 | u, x),
///   p_z_given_uax(z; u, a, x), p_w_given_ux(w; u, x), p_y_given_uax(y; u, a, x).
/// Component shapes: see the accessors below; every slice must be a pmf.
struct StructuredComponents {
  VectorXd p_x;                           // d_x
  MatrixXd p_u_given_x;                   // d_u x d_x
  MatrixXd p_a1_given_ux;                 // d_u x d_x
  std::vector<MatrixXd> p_z_given_uax;    // [a*d_x + x] -> d_z x d_u
  std::vector<MatrixXd> p_w_given_ux;     // [x] -> d_w x d_u
  std::vector<MatrixXd> p_y_given_uax;    // [a*d_x + x] -> d_y x d_u
  std::vector<double> y_values;           // optional; defaults to 0..d_y-1
};
CategoricalLaw make_structured_law(const StructuredComponents& c);

/// Matrix-inversion identification of the counterfactual outcome law:
/// for each x, Pr(y(a)|x) = P(a|W,x)^{-1} P^{-1}(Z|W,a,x) P(y,a,Z|x).
/// Requires d_w == d_z, every Pr(a|w,x) > 0, and a conditioning number of
/// P(Z|W,a,x) below 1e10; the result must be nonnegative (beyond -1e-8) and
/// sum to one over y within 1e-8, else the law is incompatible with the
/// assumed structure. Returns a d_x-by-d_y matrix.
MatrixXd identify_counterfactual(const ObservableLaw& law, Index a);

/// Direct latent-law computation Pr(y(a)|x) = sum_u Pr(y|u,a,x) Pr(u|x);
/// the validation oracle for identify_counterfactual.
MatrixXd oracle_counterfactual(const CategoricalLaw& law, Index a);

/// sum_x weight(x) sum_y y_value * [cf1 - cf0]; weights must sum to one.
double ate_from_law(const MatrixXd& cf0, const MatrixXd& cf1, const VectorXd& y_values,
                    const VectorXd& x_weights);

/// Random structured law for property tests; rejection-samples until every
/// P(Z|W,a,x) has condition number below `condition_cap`.
CategoricalLaw random_structured_law(Index d, Index d_x, Index d_y, std::uint64_t seed,
                                     double condition_cap = 1e6);

}  // namespace proxci
