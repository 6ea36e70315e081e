#pragma once

#include <optional>
#include <string>
#include <vector>

#include "proxci/estimators.hpp"
#include "proxci/simulator.hpp"

namespace proxci {

/// Study scenarios. S1-S4: the confounded mechanism with none / outcome-side
/// / treatment-side / both-sides proxy transforms. I1_*: the no-confounding
/// mechanism. I2_*: the independence-violation mechanism (true effect 0.5).
/// I3_*: the weak Z-W association mechanism.
enum class Scenario {
  S1, S2, S3, S4,
  I1_S1, I1_S2, I1_S3, I1_S4,
  I2_S1, I2_S2, I2_S3, I2_S4,
  I3_S1, I3_S2, I3_S3, I3_S4,
};

Scenario parse_scenario(const std::string& name);
const char* scenario_name(Scenario s);

/// Which covariates the baseline DR estimator adjusts for.
enum class DrCovariateSet { XZW, XOnly };

struct StudySpec {
  Scenario scenario = Scenario::S1;
  int reps = 500;
  Index n = 2000;
  std::vector<EstimatorTag> estimators = {EstimatorTag::DR, EstimatorTag::POR,
                                          EstimatorTag::PIPW, EstimatorTag::PDR};
  std::uint64_t base_seed = 1;
  int workers = 1;
  /// Defaults to XOnly for I1 scenarios and XZW elsewhere.
  std::optional<DrCovariateSet> dr_covariates;
};

struct RepRecord {
  bool ok = false;
  std::string error;
  std::vector<EstimateReport> reports;  // ordered as spec.estimators
};

struct EstimatorSummary {
  EstimatorTag tag = EstimatorTag::PDR;
  double abs_bias = 0.0;
  double signed_bias = 0.0;
  double mse = 0.0;
  double coverage = 0.0;
  double mean_ci_length = 0.0;
  double mc_se_bias = 0.0;  // SD of the estimates / sqrt(reps used)
  int used_reps = 0;
};

struct StudyResult {
  StudySpec spec;
  double psi_true = 0.0;
  std::vector<EstimatorSummary> summaries;
  std::vector<RepRecord> reps;
  int failed_reps = 0;
};

/// True effect targeted by a scenario (b_a, or 0.5 for the violation
/// mechanism).
double scenario_psi_true(Scenario s);

/// Runs `reps` independent replications, each on its own seed stream, and
/// aggregates bias / MSE / coverage / CI length per estimator. Failed
/// replications are excluded from aggregates and counted; more than 5%
/// failures aborts with diagnostics.
StudyResult run_study(const StudySpec& spec);

enum class TableFormat { Csv, Markdown };

/// Bias, MSE, coverage and average CI length scaled by 10^2 and rounded to
/// one decimal, matching run reports; both formats carry identical numbers.
std::string emit_tables(const StudyResult& result, TableFormat format);

}  // namespace proxci
