#pragma once

namespace proxci {

/// 97.5% standard-normal quantile used for every 95% Wald interval.
inline constexpr double kZCritical975 = 1.959964;

/// Regularized incomplete beta function I_x(a, b), x in [0, 1].
double incomplete_beta(double a, double b, double x);

/// Two-sided p-value of a Student-t statistic with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

}  // namespace proxci
