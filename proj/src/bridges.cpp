#include "proxci/bridges.hpp"

#include "proxci/glm.hpp"

#include <cmath>
#include <sstream>

namespace proxci {

namespace {

double condition_number(const MatrixXd& m) {
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / (s(s.size() - 1));
}

void require_both_groups(const ProxyDataset& data) {
  const Index n1 = data.n_treated();
  if (n1 == 0 || n1 == data.n()) {
    throw ValidationError("estimation requires at least one treated and one control observation");
  }
}

double guarded_exp(double v) {
  // caps the argument so a wild line-search trial yields a large finite
  // residual instead of inf propagating through the step control
  return std::exp(std::min(v, 700.0));
}

struct TreatmentMomentParts {
  MatrixXd design;  // q linear predictor rows
  MatrixXd target;  // m rows at observed A
  MatrixXd target_contrast;  // m(A=1) - m(A=0) rows (ATE form only)
};

TreatmentMomentParts treatment_parts(const ProxyDataset& data, const TermLayout& q_layout,
                                     const TermLayout& target_layout, bool att_form) {
  TreatmentMomentParts parts;
  parts.design = build_design(data, q_layout, DesignBlock::TreatmentBridge);
  parts.target = build_design(data, target_layout, DesignBlock::OutcomeBridge);
  if (!att_form) {
    parts.target_contrast = build_design(data, target_layout, DesignBlock::OutcomeBridge, 1.0) -
                            build_design(data, target_layout, DesignBlock::OutcomeBridge, 0.0);
  }
  return parts;
}

VectorXd moment_residual(const ProxyDataset& data, const TreatmentMomentParts& parts,
                         const VectorXd& t, bool att_form) {
  const Index n = data.n();
  const double inv_n = 1.0 / static_cast<double>(n);
  VectorXd r = VectorXd::Zero(parts.target.cols());
  const VectorXd eta = parts.design * t;
  for (Index i = 0; i < n; ++i) {
    if (att_form) {
      const double v = (1.0 - data.a(i)) * guarded_exp(eta(i)) - data.a(i);
      r += v * parts.target.row(i).transpose();
    } else {
      const double s = 2.0 * data.a(i) - 1.0;
      const double q = 1.0 + guarded_exp(s * eta(i));
      r += s * q * parts.target.row(i).transpose() - parts.target_contrast.row(i).transpose();
    }
  }
  return r * inv_n;
}

MatrixXd moment_jacobian(const ProxyDataset& data, const TreatmentMomentParts& parts,
                         const VectorXd& t, bool att_form) {
  const Index n = data.n();
  const double inv_n = 1.0 / static_cast<double>(n);
  MatrixXd j = MatrixXd::Zero(parts.target.cols(), parts.design.cols());
  const VectorXd eta = parts.design * t;
  for (Index i = 0; i < n; ++i) {
    double wgt;
    if (att_form) {
      wgt = (1.0 - data.a(i)) * guarded_exp(eta(i));
    } else {
      const double s = 2.0 * data.a(i) - 1.0;
      wgt = guarded_exp(s * eta(i));  // the two sign factors cancel
    }
    if (wgt != 0.0) {
      j.noalias() += wgt * parts.target.row(i).transpose() * parts.design.row(i);
    }
  }
  return j * inv_n;
}

OutcomeBridgeFit solve_outcome_moments(const MatrixXd& instruments, const MatrixXd& regressors,
                                       const VectorXd& weighted_y, const VectorXd& weights,
                                       Index n_total) {
  const Index k_u = instruments.cols();
  const Index k_h = regressors.cols();
  if (k_u < k_h) {
    throw ValidationError("instrument dimension " + std::to_string(k_u) +
                          " is smaller than bridge dimension " + std::to_string(k_h));
  }
  const double inv_n = 1.0 / static_cast<double>(n_total);
  MatrixXd gram(k_u, k_h);
  gram.setZero();
  VectorXd cross = VectorXd::Zero(k_u);
  for (Index i = 0; i < instruments.rows(); ++i) {
    if (weights(i) == 0.0) continue;
    gram.noalias() += weights(i) * instruments.row(i).transpose() * regressors.row(i);
    cross += instruments.row(i).transpose() * weighted_y(i);
  }
  gram *= inv_n;
  cross *= inv_n;

  const double cond = condition_number(gram);
  if (!(cond < kConditionLimit)) {
    std::ostringstream msg;
    msg << "weak-proxy / rank-deficient moment system (condition " << cond << ")";
    throw SolverError(msg.str(), cond);
  }

  OutcomeBridgeFit fit;
  fit.gram_condition = cond;
  if (k_u == k_h) {
    fit.coef = gram.partialPivLu().solve(cross);
  } else {
    fit.coef = gram.colPivHouseholderQr().solve(cross);
  }
  fit.residual_moment_norm = (gram * fit.coef - cross).lpNorm<Eigen::Infinity>();
  return fit;
}

struct SolveAttempt {
  VectorXd t;
  int iterations = 0;
  double residual_inf = 0.0;
  bool converged = false;
  std::vector<double> trace;
};

// Damped Newton on the moment residual with a Levenberg-Marquardt phase once
// the Newton line search stagnates.
SolveAttempt newton_lm_solve(const ProxyDataset& data, const TreatmentMomentParts& parts,
                             bool att_form, const VectorXd& start) {
  constexpr int kMaxIter = 200;
  constexpr double kStepFloor = 1.0 / double(1 << 30);

  SolveAttempt out;
  VectorXd t = start;
  VectorXd r = moment_residual(data, parts, t, att_form);
  double r2 = r.squaredNorm();
  out.trace.push_back(std::sqrt(r2));

  int iter = 0;
  bool newton_phase = true;
  double lm_lambda = 1e-8;
  while (iter < kMaxIter) {
    if (r.lpNorm<Eigen::Infinity>() <= kMomentTol) break;
    ++iter;
    const MatrixXd j = moment_jacobian(data, parts, t, att_form);

    VectorXd step;
    if (newton_phase) {
      Eigen::PartialPivLU<MatrixXd> lu(j);
      step = lu.solve(-r);
      if (!step.allFinite()) {
        newton_phase = false;  // singular Jacobian away from the root
        continue;
      }
      double alpha = 1.0;
      bool accepted = false;
      while (alpha >= kStepFloor) {
        const VectorXd trial = t + alpha * step;
        const VectorXd r_trial = moment_residual(data, parts, trial, att_form);
        const double trial2 = r_trial.squaredNorm();
        if (std::isfinite(trial2) && trial2 < r2) {
          t = trial;
          r = r_trial;
          r2 = trial2;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      out.trace.push_back(std::sqrt(r2));
      if (!accepted) newton_phase = false;  // stagnated; restart with LM
    } else {
      const MatrixXd jtj = j.transpose() * j;
      const double scale = std::max(jtj.diagonal().maxCoeff(), 1.0);
      bool accepted = false;
      for (int tries = 0; tries < 40; ++tries) {
        MatrixXd damped = jtj;
        damped.diagonal().array() += lm_lambda * scale;
        step = damped.ldlt().solve(-j.transpose() * r);
        const VectorXd trial = t + step;
        const VectorXd r_trial = moment_residual(data, parts, trial, att_form);
        const double trial2 = r_trial.squaredNorm();
        if (std::isfinite(trial2) && trial2 < r2) {
          t = trial;
          r = r_trial;
          r2 = trial2;
          lm_lambda = std::max(lm_lambda * 0.1, 1e-12);
          accepted = true;
          break;
        }
        lm_lambda *= 10.0;
      }
      out.trace.push_back(std::sqrt(r2));
      if (!accepted) break;  // no descent direction left
    }
  }
  out.t = t;
  out.iterations = iter;
  out.residual_inf = r.lpNorm<Eigen::Infinity>();
  out.converged = out.residual_inf <= kMomentTol;
  return out;
}

// Fallback start mapped from a plain logistic fit of A on the non-A design
// terms: q == 1/f(A|.) corresponds to negated logistic coefficients (ATE
// form) and q == odds to the coefficients themselves (ATT form).
std::optional<VectorXd> logistic_start(const ProxyDataset& data, const TermLayout& layout,
                                       bool att_form) {
  std::vector<Index> design_cols;
  Index col = layout.intercept ? 1 : 0;
  if (!layout.intercept) return std::nullopt;
  std::vector<ColumnRef> plain;
  for (const auto& ref : layout.main_terms) {
    if (ref.src != Source::A) {
      plain.push_back(ref);
      design_cols.push_back(col);
    }
    ++col;
  }
  MatrixXd design(data.n(), static_cast<Index>(plain.size()) + 1);
  design.col(0).setOnes();
  for (std::size_t j = 0; j < plain.size(); ++j) {
    const auto& ref = plain[j];
    const MatrixXd& block = ref.src == Source::Z ? data.z
                            : ref.src == Source::X ? data.x
                                                   : data.w;
    design.col(static_cast<Index>(j) + 1) = block.col(ref.index);
  }
  try {
    const GlmFit glm = glm_fit(data.a, design, GlmKind::Logistic);
    if (!glm.converged) return std::nullopt;
    VectorXd start = VectorXd::Zero(layout.dim());
    const double sign = att_form ? 1.0 : -1.0;
    start(0) = sign * glm.coefficients(0);
    for (std::size_t j = 0; j < design_cols.size(); ++j) {
      start(design_cols[j]) = sign * glm.coefficients(static_cast<Index>(j) + 1);
    }
    return start;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

TreatmentBridgeFit solve_treatment_moments(const ProxyDataset& data, const TermLayout& q_layout,
                                           const TermLayout& target_layout, bool att_form) {
  require_both_groups(data);
  const auto parts = treatment_parts(data, q_layout, target_layout, att_form);
  if (parts.target.cols() != parts.design.cols()) {
    throw ValidationError("target dimension " + std::to_string(parts.target.cols()) +
                          " must equal coefficient dimension " +
                          std::to_string(parts.design.cols()));
  }
  if (data.n() < parts.design.cols()) {
    throw ValidationError("fewer observations than treatment-bridge coefficients");
  }

  SolveAttempt attempt =
      newton_lm_solve(data, parts, att_form, VectorXd::Zero(parts.design.cols()));
  if (!attempt.converged) {
    if (const auto start = logistic_start(data, q_layout, att_form)) {
      SolveAttempt retry = newton_lm_solve(data, parts, att_form, *start);
      if (retry.converged) {
        retry.iterations += attempt.iterations;
        attempt = std::move(retry);
      }
    }
  }
  if (!attempt.converged) {
    std::ostringstream msg;
    msg << "treatment bridge did not converge: residual " << attempt.residual_inf << " after "
        << attempt.iterations << " iterations (trace tail:";
    const std::size_t tail = std::min<std::size_t>(attempt.trace.size(), 6);
    for (std::size_t k = attempt.trace.size() - tail; k < attempt.trace.size(); ++k) {
      msg << ' ' << attempt.trace[k];
    }
    msg << ")";
    throw SolverError(msg.str(), attempt.residual_inf);
  }

  TreatmentBridgeFit fit;
  fit.layout = q_layout;
  fit.target_layout = target_layout;
  fit.att_form = att_form;
  fit.coef = attempt.t;
  fit.iterations = attempt.iterations;
  fit.final_residual_norm = attempt.residual_inf;
  fit.converged = true;
  const double jac_cond = condition_number(moment_jacobian(data, parts, fit.coef, att_form));
  if (!(jac_cond < kConditionLimit)) {
    throw SolverError("locally unidentified treatment bridge (Jacobian condition " +
                          std::to_string(jac_cond) + ")",
                      jac_cond);
  }
  return fit;
}

}  // namespace

OutcomeBridgeFit fit_outcome_bridge(const ProxyDataset& data, const TermLayout& h_layout,
                                    const TermLayout& instrument_layout) {
  require_both_groups(data);
  const MatrixXd instruments = build_design(data, instrument_layout, DesignBlock::Instrument);
  const MatrixXd regressors = build_design(data, h_layout, DesignBlock::OutcomeBridge);
  if (data.n() < instruments.cols()) {
    throw ValidationError("fewer observations than instrument dimension");
  }
  OutcomeBridgeFit fit = solve_outcome_moments(instruments, regressors, data.y,
                                               VectorXd::Ones(data.n()), data.n());
  fit.layout = h_layout;
  fit.instrument_layout = instrument_layout;
  return fit;
}

OutcomeBridgeFit fit_att_outcome_bridge(const ProxyDataset& data, const TermLayout& h_layout,
                                        const TermLayout& instrument_layout) {
  const MatrixXd instruments = build_design(data, instrument_layout, DesignBlock::Instrument);
  const MatrixXd regressors = build_design(data, h_layout, DesignBlock::OutcomeBridge);
  const VectorXd controls = VectorXd::Ones(data.n()) - data.a;
  if (controls.sum() < static_cast<double>(regressors.cols())) {
    throw ValidationError("insufficient control observations for the ATT outcome bridge");
  }
  OutcomeBridgeFit fit =
      solve_outcome_moments(instruments, regressors, data.y.cwiseProduct(controls), controls,
                            data.n());
  fit.layout = h_layout;
  fit.instrument_layout = instrument_layout;
  fit.att_form = true;
  return fit;
}

TreatmentBridgeFit fit_treatment_bridge(const ProxyDataset& data, const TermLayout& q_layout,
                                        const TermLayout& target_layout) {
  return solve_treatment_moments(data, q_layout, target_layout, /*att_form=*/false);
}

TreatmentBridgeFit fit_att_treatment_bridge(const ProxyDataset& data, const TermLayout& q_layout,
                                            const TermLayout& target_layout) {
  return solve_treatment_moments(data, q_layout, target_layout, /*att_form=*/true);
}

VectorXd eval_outcome_bridge(const ProxyDataset& data, const OutcomeBridgeFit& fit,
                             std::optional<double> a_override) {
  return build_design(data, fit.layout, DesignBlock::OutcomeBridge, a_override) * fit.coef;
}

VectorXd eval_treatment_bridge_at(const ProxyDataset& data, const TreatmentBridgeFit& fit,
                                  const VectorXd& coef) {
  const VectorXd eta = build_design(data, fit.layout, DesignBlock::TreatmentBridge) * coef;
  VectorXd q(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    if (fit.att_form) {
      q(i) = guarded_exp(eta(i));
    } else {
      const double s = 2.0 * data.a(i) - 1.0;
      q(i) = 1.0 + guarded_exp(s * eta(i));
    }
  }
  return q;
}

VectorXd eval_treatment_bridge(const ProxyDataset& data, const TreatmentBridgeFit& fit) {
  return eval_treatment_bridge_at(data, fit, fit.coef);
}

VectorXd outcome_bridge_moment(const ProxyDataset& data, const OutcomeBridgeFit& fit,
                               const VectorXd& coef) {
  const MatrixXd instruments =
      build_design(data, fit.instrument_layout, DesignBlock::Instrument);
  const MatrixXd regressors = build_design(data, fit.layout, DesignBlock::OutcomeBridge);
  const VectorXd resid = data.y - regressors * coef;
  VectorXd r = VectorXd::Zero(instruments.cols());
  for (Index i = 0; i < data.n(); ++i) {
    const double wgt = fit.att_form ? 1.0 - data.a(i) : 1.0;
    if (wgt != 0.0) r += wgt * resid(i) * instruments.row(i).transpose();
  }
  return r / static_cast<double>(data.n());
}

VectorXd treatment_bridge_moment(const ProxyDataset& data, const TreatmentBridgeFit& fit,
                                 const VectorXd& coef) {
  const auto parts = treatment_parts(data, fit.layout, fit.target_layout, fit.att_form);
  return moment_residual(data, parts, coef, fit.att_form);
}

MatrixXd treatment_bridge_jacobian(const ProxyDataset& data, const TreatmentBridgeFit& fit,
                                   const VectorXd& coef) {
  const auto parts = treatment_parts(data, fit.layout, fit.target_layout, fit.att_form);
  return moment_jacobian(data, parts, coef, fit.att_form);
}

}  // namespace proxci
