#pragma once

#include <map>
#include <string>

#include "proxci/bridges.hpp"
#include "proxci/glm.hpp"
#include "proxci/inference.hpp"

namespace proxci {

enum class EstimatorTag { POR, PIPW, PDR, DR, ATT_OR, ATT_IPW, ATT_DR };

const char* estimator_name(EstimatorTag tag);
EstimatorTag parse_estimator(const std::string& name);

/// Point estimate with joint M-estimation sandwich inference. The interval is
/// always estimate -/+ 1.959964 * std_err.
struct EstimateReport {
  EstimatorTag estimator = EstimatorTag::PDR;
  double estimate = 0.0;
  double std_err = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  Index n = 0;
  std::map<std::string, double> solver_meta;
};

/// Proximal outcome regression: mean{h(W,1,X) - h(W,0,X)}. The sandwich
/// stacks the bridge moment equations with the target equation so the
/// standard error reflects nuisance estimation.
EstimateReport por(const ProxyDataset& data, const OutcomeBridgeFit& h_fit);

/// Proximal inverse probability weighting: mean{(-1)^{1-A} q(Z,A,X) Y}.
EstimateReport pipw(const ProxyDataset& data, const TreatmentBridgeFit& q_fit);

/// Proximal doubly robust:
/// mean{(-1)^{1-A} q [Y - h(W,A,X)] + h(W,1,X) - h(W,0,X)}.
EstimateReport pdr(const ProxyDataset& data, const OutcomeBridgeFit& h_fit,
                   const TreatmentBridgeFit& q_fit);

/// The three treated-effect estimators, solved from mean{EIF} = 0 with the
/// treated fraction estimated by its own stacked equation A - p.
struct AttReports {
  EstimateReport outcome_regression;
  EstimateReport ipw;
  EstimateReport doubly_robust;
};
AttReports att_estimators(const ProxyDataset& data, const OutcomeBridgeFit& h_fit,
                          const TreatmentBridgeFit& q_fit);

struct GlmControls {
  double propensity_clamp = 0.01;  // fitted propensities clipped to [c, 1-c]
};

/// Classical AIPW baseline, valid only under exchangeability given L:
/// mean{(-1)^{1-A}/f(A|L) [Y - E(Y|L,A)] + E(Y|L,1) - E(Y|L,0)} with a
/// logistic model for f and a linear model for E(Y|L,A).
EstimateReport standard_dr(const ProxyDataset& data, const std::vector<ColumnRef>& l_columns,
                           const GlmControls& controls = {});

/// Nuisance values exactly as standard_dr consumes them, for cross-checks.
struct DrNuisances {
  VectorXd fhat;   // clamped f(A_i | L_i)
  VectorXd yhat;   // E(Y | L_i, A_i)
  VectorXd yhat1;  // E(Y | L_i, 1)
  VectorXd yhat0;  // E(Y | L_i, 0)
  GlmFit outcome;
  GlmFit propensity;
};
DrNuisances standard_dr_nuisances(const ProxyDataset& data,
                                  const std::vector<ColumnRef>& l_columns,
                                  const GlmControls& controls = {});

/// Plain averages of the defining summands over supplied nuisance values.
double pipw_point(const VectorXd& a, const VectorXd& y, const VectorXd& q);
double por_point(const VectorXd& h1, const VectorXd& h0);
double pdr_point(const VectorXd& a, const VectorXd& y, const VectorXd& q, const VectorXd& h,
                 const VectorXd& h1, const VectorXd& h0);
double dr_point(const VectorXd& a, const VectorXd& y, const VectorXd& fhat, const VectorXd& yhat,
                const VectorXd& yhat1, const VectorXd& yhat0);

/// PDR summand mean at explicitly supplied bridge coefficients (the mean of
/// the influence function plus the target value; used to probe nuisance
/// orthogonality around a fit).
double pdr_point_at(const ProxyDataset& data, const OutcomeBridgeFit& h_fit,
                    const TreatmentBridgeFit& q_fit, const VectorXd& b, const VectorXd& t);

}  // namespace proxci
