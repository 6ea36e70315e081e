#include "proxci/estimators.hpp"

#include <cmath>

namespace proxci {

const char* estimator_name(EstimatorTag tag) {
  switch (tag) {
    case EstimatorTag::POR:
      return "POR";
    case EstimatorTag::PIPW:
      return "PIPW";
    case EstimatorTag::PDR:
      return "PDR";
    case EstimatorTag::DR:
      return "DR";
    case EstimatorTag::ATT_OR:
      return "ATT_OR";
    case EstimatorTag::ATT_IPW:
      return "ATT_IPW";
    case EstimatorTag::ATT_DR:
      return "ATT_DR";
  }
  return "?";
}

EstimatorTag parse_estimator(const std::string& name) {
  for (EstimatorTag tag : {EstimatorTag::POR, EstimatorTag::PIPW, EstimatorTag::PDR,
                           EstimatorTag::DR, EstimatorTag::ATT_OR, EstimatorTag::ATT_IPW,
                           EstimatorTag::ATT_DR}) {
    if (name == estimator_name(tag)) return tag;
  }
  throw ValidationError("unknown estimator tag: " + name);
}

namespace {

double sign_of(double a) { return 2.0 * a - 1.0; }

// Per-observation pieces shared by the proximal stacks. Designs are built
// once; score closures only take dot products.
struct BridgeParts {
  MatrixXd h_regressors;   // v(W,A,X)
  MatrixXd h_contrast;     // v(W,1,X) - v(W,0,X)
  MatrixXd h_instruments;  // u(Z,A,X)
  MatrixXd h_gram;         // mean{u v'}; used when over-identified
  bool h_over_identified = false;
  MatrixXd q_design;       // linear predictor rows of q
  MatrixXd q_target;       // m(W,A,X)
  MatrixXd q_contrast;     // m(W,1,X) - m(W,0,X)
};

BridgeParts outcome_parts(const ProxyDataset& data, const OutcomeBridgeFit& h_fit) {
  BridgeParts parts;
  parts.h_regressors = build_design(data, h_fit.layout, DesignBlock::OutcomeBridge);
  parts.h_contrast = build_design(data, h_fit.layout, DesignBlock::OutcomeBridge, 1.0) -
                     build_design(data, h_fit.layout, DesignBlock::OutcomeBridge, 0.0);
  parts.h_instruments = build_design(data, h_fit.instrument_layout, DesignBlock::Instrument);
  parts.h_over_identified = parts.h_instruments.cols() > parts.h_regressors.cols();
  if (parts.h_over_identified) {
    parts.h_gram = parts.h_instruments.transpose() * parts.h_regressors /
                   static_cast<double>(data.n());
  }
  return parts;
}

void fill_treatment_parts(const ProxyDataset& data, const TreatmentBridgeFit& q_fit,
                          BridgeParts& parts) {
  parts.q_design = build_design(data, q_fit.layout, DesignBlock::TreatmentBridge);
  parts.q_target = build_design(data, q_fit.target_layout, DesignBlock::OutcomeBridge);
  if (!q_fit.att_form) {
    parts.q_contrast = build_design(data, q_fit.target_layout, DesignBlock::OutcomeBridge, 1.0) -
                       build_design(data, q_fit.target_layout, DesignBlock::OutcomeBridge, 0.0);
  }
}

// Outcome-bridge score block at observation i; writes k_h entries.
void outcome_score(const BridgeParts& parts, const ProxyDataset& data, Index i,
                   const Eigen::Ref<const VectorXd>& b, bool att_form,
                   Eigen::Ref<VectorXd> out) {
  const double wgt = att_form ? 1.0 - data.a(i) : 1.0;
  const double resid = data.y(i) - parts.h_regressors.row(i).dot(b);
  if (parts.h_over_identified) {
    out = parts.h_gram.transpose() * (wgt * resid * parts.h_instruments.row(i).transpose());
  } else {
    out = wgt * resid * parts.h_instruments.row(i).transpose();
  }
}

// Treatment-bridge score block; also reports q_i at the supplied t.
double treatment_score(const BridgeParts& parts, const ProxyDataset& data, Index i,
                       const Eigen::Ref<const VectorXd>& t, bool att_form,
                       Eigen::Ref<VectorXd> out) {
  const double eta = parts.q_design.row(i).dot(t);
  if (att_form) {
    const double q = std::exp(std::min(eta, 700.0));
    out = ((1.0 - data.a(i)) * q - data.a(i)) * parts.q_target.row(i).transpose();
    return q;
  }
  const double s = sign_of(data.a(i));
  const double q = 1.0 + std::exp(std::min(s * eta, 700.0));
  out = s * q * parts.q_target.row(i).transpose() - parts.q_contrast.row(i).transpose();
  return q;
}

EstimateReport make_report(EstimatorTag tag, double estimate, double variance, Index n,
                           std::map<std::string, double> meta) {
  EstimateReport report;
  report.estimator = tag;
  report.estimate = estimate;
  report.std_err = std::sqrt(std::max(variance, 0.0));
  const auto [lo, hi] = wald_interval(report.estimate, report.std_err);
  report.ci_low = lo;
  report.ci_high = hi;
  report.n = n;
  report.solver_meta = std::move(meta);
  return report;
}

std::map<std::string, double> bridge_meta(const OutcomeBridgeFit* h, const TreatmentBridgeFit* q) {
  std::map<std::string, double> meta;
  if (h) {
    meta["h_gram_condition"] = h->gram_condition;
    meta["h_residual_norm"] = h->residual_moment_norm;
  }
  if (q) {
    meta["q_iterations"] = static_cast<double>(q->iterations);
    meta["q_residual_norm"] = q->final_residual_norm;
  }
  return meta;
}

}  // namespace

double por_point(const VectorXd& h1, const VectorXd& h0) { return (h1 - h0).mean(); }

double pipw_point(const VectorXd& a, const VectorXd& y, const VectorXd& q) {
  double acc = 0.0;
  for (Index i = 0; i < a.size(); ++i) acc += sign_of(a(i)) * q(i) * y(i);
  return acc / static_cast<double>(a.size());
}

double pdr_point(const VectorXd& a, const VectorXd& y, const VectorXd& q, const VectorXd& h,
                 const VectorXd& h1, const VectorXd& h0) {
  double acc = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    acc += sign_of(a(i)) * q(i) * (y(i) - h(i)) + h1(i) - h0(i);
  }
  return acc / static_cast<double>(a.size());
}

double dr_point(const VectorXd& a, const VectorXd& y, const VectorXd& fhat, const VectorXd& yhat,
                const VectorXd& yhat1, const VectorXd& yhat0) {
  double acc = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    acc += sign_of(a(i)) / fhat(i) * (y(i) - yhat(i)) + yhat1(i) - yhat0(i);
  }
  return acc / static_cast<double>(a.size());
}

EstimateReport por(const ProxyDataset& data, const OutcomeBridgeFit& h_fit) {
  const BridgeParts parts = outcome_parts(data, h_fit);
  const Index kh = h_fit.coef.size();
  const double estimate = (parts.h_contrast * h_fit.coef).mean();

  EstimatingStack stack;
  stack.dim = kh + 1;
  stack.n_obs = data.n();
  stack.score = [&parts, &data, kh](Index i, const VectorXd& phi, VectorXd& out) {
    outcome_score(parts, data, i, phi.head(kh), false, out.head(kh));
    out(kh) = parts.h_contrast.row(i).dot(phi.head(kh)) - phi(kh);
  };
  VectorXd phi(stack.dim);
  phi << h_fit.coef, estimate;
  const MatrixXd cov = sandwich_variance(stack, phi);
  return make_report(EstimatorTag::POR, estimate, cov(kh, kh), data.n(),
                     bridge_meta(&h_fit, nullptr));
}

EstimateReport pipw(const ProxyDataset& data, const TreatmentBridgeFit& q_fit) {
  BridgeParts parts;
  fill_treatment_parts(data, q_fit, parts);
  const Index kq = q_fit.coef.size();
  const double estimate = pipw_point(data.a, data.y, eval_treatment_bridge(data, q_fit));

  EstimatingStack stack;
  stack.dim = kq + 1;
  stack.n_obs = data.n();
  stack.score = [&parts, &data, kq](Index i, const VectorXd& phi, VectorXd& out) {
    const double q = treatment_score(parts, data, i, phi.head(kq), false, out.head(kq));
    out(kq) = sign_of(data.a(i)) * q * data.y(i) - phi(kq);
  };
  VectorXd phi(stack.dim);
  phi << q_fit.coef, estimate;
  const MatrixXd cov = sandwich_variance(stack, phi);
  return make_report(EstimatorTag::PIPW, estimate, cov(kq, kq), data.n(),
                     bridge_meta(nullptr, &q_fit));
}

EstimateReport pdr(const ProxyDataset& data, const OutcomeBridgeFit& h_fit,
                   const TreatmentBridgeFit& q_fit) {
  BridgeParts parts = outcome_parts(data, h_fit);
  fill_treatment_parts(data, q_fit, parts);
  const Index kh = h_fit.coef.size();
  const Index kq = q_fit.coef.size();

  const double estimate =
      pdr_point(data.a, data.y, eval_treatment_bridge(data, q_fit),
                eval_outcome_bridge(data, h_fit), eval_outcome_bridge(data, h_fit, 1.0),
                eval_outcome_bridge(data, h_fit, 0.0));

  EstimatingStack stack;
  stack.dim = kh + kq + 1;
  stack.n_obs = data.n();
  stack.score = [&parts, &data, kh, kq](Index i, const VectorXd& phi, VectorXd& out) {
    const auto b = phi.head(kh);
    outcome_score(parts, data, i, b, false, out.head(kh));
    const double q = treatment_score(parts, data, i, phi.segment(kh, kq), false,
                                     out.segment(kh, kq));
    const double resid = data.y(i) - parts.h_regressors.row(i).dot(b);
    out(kh + kq) = sign_of(data.a(i)) * q * resid + parts.h_contrast.row(i).dot(b) - phi(kh + kq);
  };
  VectorXd phi(stack.dim);
  phi << h_fit.coef, q_fit.coef, estimate;
  const MatrixXd cov = sandwich_variance(stack, phi);
  return make_report(EstimatorTag::PDR, estimate, cov(kh + kq, kh + kq), data.n(),
                     bridge_meta(&h_fit, &q_fit));
}

double pdr_point_at(const ProxyDataset& data, const OutcomeBridgeFit& h_fit,
                    const TreatmentBridgeFit& q_fit, const VectorXd& b, const VectorXd& t) {
  OutcomeBridgeFit h = h_fit;
  h.coef = b;
  return pdr_point(data.a, data.y, eval_treatment_bridge_at(data, q_fit, t),
                   eval_outcome_bridge(data, h), eval_outcome_bridge(data, h, 1.0),
                   eval_outcome_bridge(data, h, 0.0));
}

AttReports att_estimators(const ProxyDataset& data, const OutcomeBridgeFit& h_fit,
                          const TreatmentBridgeFit& q_fit) {
  if (!h_fit.att_form || !q_fit.att_form) {
    throw ValidationError("att_estimators requires control-group bridge fits");
  }
  const Index n1 = data.n_treated();
  if (n1 == 0) throw ValidationError("no treated observations: ATT undefined");
  if (n1 == data.n()) throw ValidationError("no control observations: ATT bridges undefined");

  BridgeParts parts = outcome_parts(data, h_fit);
  fill_treatment_parts(data, q_fit, parts);
  const Index kh = h_fit.coef.size();
  const Index kq = q_fit.coef.size();

  const VectorXd h = eval_outcome_bridge(data, h_fit);
  const VectorXd q = eval_treatment_bridge(data, q_fit);
  const double p_hat = data.a.mean();
  const double n_inv = 1.0 / static_cast<double>(data.n());

  double or_sum = 0.0, ipw_sum = 0.0, dr_sum = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const double ai = data.a(i);
    or_sum += ai * (data.y(i) - h(i));
    ipw_sum += ai * data.y(i) - (1.0 - ai) * q(i) * data.y(i);
    dr_sum += ai * data.y(i) - (1.0 - ai) * q(i) * (data.y(i) - h(i)) - ai * h(i);
  }
  const double mu_or = or_sum * n_inv / p_hat;
  const double mu_ipw = ipw_sum * n_inv / p_hat;
  const double mu_dr = dr_sum * n_inv / p_hat;

  // Stacks over (nuisances, p, mu); the EIF is scaled through by p so the
  // treated-fraction equation enters as A - p.
  auto run_stack = [&](EstimatorTag tag, bool use_h, bool use_q, double mu) {
    const Index kb = use_h ? kh : 0;
    const Index kt = use_q ? kq : 0;
    EstimatingStack stack;
    stack.dim = kb + kt + 2;
    stack.n_obs = data.n();
    stack.score = [&, kb, kt, use_h, use_q, tag](Index i, const VectorXd& phi, VectorXd& out) {
      const double ai = data.a(i);
      double hi = 0.0, qi = 0.0;
      if (use_h) {
        outcome_score(parts, data, i, phi.head(kb), true, out.head(kb));
        hi = parts.h_regressors.row(i).dot(phi.head(kb));
      }
      if (use_q) {
        qi = treatment_score(parts, data, i, phi.segment(kb, kt), true, out.segment(kb, kt));
      }
      out(kb + kt) = ai - phi(kb + kt);
      const double mu_par = phi(kb + kt + 1);
      double eif;
      switch (tag) {
        case EstimatorTag::ATT_OR:
          eif = ai * (data.y(i) - hi) - ai * mu_par;
          break;
        case EstimatorTag::ATT_IPW:
          eif = ai * data.y(i) - (1.0 - ai) * qi * data.y(i) - ai * mu_par;
          break;
        default:
          eif = ai * data.y(i) - (1.0 - ai) * qi * (data.y(i) - hi) - ai * hi - ai * mu_par;
      }
      out(kb + kt + 1) = eif;
    };
    VectorXd phi(stack.dim);
    Index at = 0;
    if (use_h) {
      phi.head(kh) = h_fit.coef;
      at += kh;
    }
    if (use_q) {
      phi.segment(at, kq) = q_fit.coef;
      at += kq;
    }
    phi(at) = p_hat;
    phi(at + 1) = mu;
    const MatrixXd cov = sandwich_variance(stack, phi);
    auto meta = bridge_meta(use_h ? &h_fit : nullptr, use_q ? &q_fit : nullptr);
    meta["treated_fraction"] = p_hat;
    return make_report(tag, mu, cov(at + 1, at + 1), data.n(), std::move(meta));
  };

  AttReports reports;
  reports.outcome_regression = run_stack(EstimatorTag::ATT_OR, true, false, mu_or);
  reports.ipw = run_stack(EstimatorTag::ATT_IPW, false, true, mu_ipw);
  reports.doubly_robust = run_stack(EstimatorTag::ATT_DR, true, true, mu_dr);
  return reports;
}

DrNuisances standard_dr_nuisances(const ProxyDataset& data,
                                  const std::vector<ColumnRef>& l_columns,
                                  const GlmControls& controls) {
  const Index n = data.n();
  const Index kl = static_cast<Index>(l_columns.size());
  for (const auto& ref : l_columns) {
    if (ref.src == Source::A) throw ValidationError("L cannot contain the treatment");
  }

  MatrixXd l_block(n, kl);
  for (Index j = 0; j < kl; ++j) {
    const auto& ref = l_columns[static_cast<std::size_t>(j)];
    const MatrixXd& src = ref.src == Source::X ? data.x : (ref.src == Source::Z ? data.z : data.w);
    if (ref.index < 0 || ref.index >= src.cols()) {
      throw ValidationError("L column reference out of range");
    }
    l_block.col(j) = src.col(ref.index);
  }

  MatrixXd prop_design(n, kl + 1);
  prop_design.col(0).setOnes();
  prop_design.rightCols(kl) = l_block;

  MatrixXd out_design(n, kl + 2);
  out_design.col(0).setOnes();
  out_design.middleCols(1, kl) = l_block;
  out_design.col(kl + 1) = data.a;

  DrNuisances nu;
  nu.propensity = glm_fit(data.a, prop_design, GlmKind::Logistic);
  if (!nu.propensity.converged) {
    throw SolverError("propensity IRLS diverged (separation suspected)");
  }
  nu.outcome = glm_fit(data.y, out_design, GlmKind::Linear);

  const VectorXd p1 = glm_predict(nu.propensity, prop_design);
  nu.fhat.resize(n);
  const double lo = controls.propensity_clamp;
  for (Index i = 0; i < n; ++i) {
    const double p = std::clamp(p1(i), lo, 1.0 - lo);
    nu.fhat(i) = data.a(i) == 1.0 ? p : 1.0 - p;
  }
  nu.yhat = glm_predict(nu.outcome, out_design);
  MatrixXd forced = out_design;
  forced.col(kl + 1).setOnes();
  nu.yhat1 = glm_predict(nu.outcome, forced);
  forced.col(kl + 1).setZero();
  nu.yhat0 = glm_predict(nu.outcome, forced);
  return nu;
}

EstimateReport standard_dr(const ProxyDataset& data, const std::vector<ColumnRef>& l_columns,
                           const GlmControls& controls) {
  const Index n = data.n();
  const Index kl = static_cast<Index>(l_columns.size());
  const DrNuisances nu = standard_dr_nuisances(data, l_columns, controls);
  const double estimate = dr_point(data.a, data.y, nu.fhat, nu.yhat, nu.yhat1, nu.yhat0);

  // Rebuild the designs the nuisance fits were produced on.
  MatrixXd l_block(n, kl);
  for (Index j = 0; j < kl; ++j) {
    const auto& ref = l_columns[static_cast<std::size_t>(j)];
    const MatrixXd& src = ref.src == Source::X ? data.x : (ref.src == Source::Z ? data.z : data.w);
    l_block.col(j) = src.col(ref.index);
  }
  MatrixXd prop_design(n, kl + 1);
  prop_design.col(0).setOnes();
  prop_design.rightCols(kl) = l_block;
  MatrixXd out_design(n, kl + 2);
  out_design.col(0).setOnes();
  out_design.middleCols(1, kl) = l_block;
  out_design.col(kl + 1) = data.a;
  MatrixXd out_contrast = MatrixXd::Zero(n, kl + 2);
  out_contrast.col(kl + 1).setOnes();  // design(A=1) - design(A=0)

  const Index ko = kl + 2;
  const Index kp = kl + 1;
  const double clamp_lo = controls.propensity_clamp;

  EstimatingStack stack;
  stack.dim = ko + kp + 1;
  stack.n_obs = n;
  stack.score = [&, ko, kp, clamp_lo](Index i, const VectorXd& phi, VectorXd& out) {
    const auto beta = phi.head(ko);
    const auto gamma = phi.segment(ko, kp);
    const double resid = data.y(i) - out_design.row(i).dot(beta);
    out.head(ko) = resid * out_design.row(i).transpose();
    const double p = 1.0 / (1.0 + std::exp(-prop_design.row(i).dot(gamma)));
    out.segment(ko, kp) = (data.a(i) - p) * prop_design.row(i).transpose();
    const double pc = std::clamp(p, clamp_lo, 1.0 - clamp_lo);
    const double f = data.a(i) == 1.0 ? pc : 1.0 - pc;
    out(ko + kp) = sign_of(data.a(i)) / f * resid + out_contrast.row(i).dot(beta) - phi(ko + kp);
  };
  VectorXd phi(stack.dim);
  phi << nu.outcome.coefficients, nu.propensity.coefficients, estimate;
  const MatrixXd cov = sandwich_variance(stack, phi);

  std::map<std::string, double> meta;
  meta["propensity_irls_iterations"] = static_cast<double>(nu.propensity.iterations);
  meta["outcome_glm_iterations"] = static_cast<double>(nu.outcome.iterations);
  return make_report(EstimatorTag::DR, estimate, cov(ko + kp, ko + kp), n, std::move(meta));
}

}  // namespace proxci
