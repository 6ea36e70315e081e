#include "proxci/harness.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace proxci {

namespace {

struct ScenarioTraits {
  bool violation_dgm = false;
  SimConfig config;  // unused when violation_dgm
  Misspec misspec = Misspec::None;
  DrCovariateSet dr_default = DrCovariateSet::XZW;
};

Misspec misspec_of(int variant) {
  switch (variant) {
    case 1:
      return Misspec::None;
    case 2:
      return Misspec::WStar3;
    case 3:
      return Misspec::ZStar3;
    default:
      return Misspec::BothStar1;
  }
}

ScenarioTraits traits_of(Scenario s) {
  const int code = static_cast<int>(s);
  const int family = code / 4;  // 0: main, 1: I1, 2: I2, 3: I3
  const int variant = code % 4 + 1;
  ScenarioTraits t;
  t.misspec = misspec_of(variant);
  switch (family) {
    case 0:
      t.config = SimConfig{};
      break;
    case 1:
      t.config = no_confounding_config();
      t.dr_default = DrCovariateSet::XOnly;
      break;
    case 2:
      t.violation_dgm = true;
      break;
    default:
      t.config = weak_zw_config();
      break;
  }
  return t;
}

const char* kScenarioNames[] = {"S1",    "S2",    "S3",    "S4",     //
                                "I1_S1", "I1_S2", "I1_S3", "I1_S4",  //
                                "I2_S1", "I2_S2", "I2_S3", "I2_S4",  //
                                "I3_S1", "I3_S2", "I3_S3", "I3_S4"};

std::vector<ColumnRef> dr_columns(const ProxyDataset& data, DrCovariateSet set) {
  std::vector<ColumnRef> cols;
  for (Index j = 0; j < data.px(); ++j) cols.push_back({Source::X, static_cast<int>(j)});
  if (set == DrCovariateSet::XZW) {
    for (Index j = 0; j < data.pz(); ++j) cols.push_back({Source::Z, static_cast<int>(j)});
    for (Index j = 0; j < data.pw(); ++j) cols.push_back({Source::W, static_cast<int>(j)});
  }
  return cols;
}

}  // namespace

Scenario parse_scenario(const std::string& name) {
  for (int i = 0; i < 16; ++i) {
    if (name == kScenarioNames[i]) return static_cast<Scenario>(i);
  }
  throw ValidationError("unknown scenario: " + name);
}

const char* scenario_name(Scenario s) { return kScenarioNames[static_cast<int>(s)]; }

double scenario_psi_true(Scenario s) {
  const ScenarioTraits t = traits_of(s);
  if (t.violation_dgm) return 0.5;
  return derive_params(t.config, t.config.t_0, t.config.t_x).psi_true;
}

namespace {

RepRecord run_one_rep(const StudySpec& spec, const ScenarioTraits& traits,
                      DrCovariateSet dr_set, int rep) {
  RepRecord record;
  try {
    ProxyDataset raw;
    if (traits.violation_dgm) {
      ViolationConfig vc;
      vc.n = spec.n;
      vc.seed = replication_seed(spec.base_seed, static_cast<std::uint64_t>(rep));
      raw = simulate_violation(vc);
    } else {
      SimConfig config = traits.config;
      config.n = spec.n;
      config.seed = replication_seed(spec.base_seed, static_cast<std::uint64_t>(rep));
      raw = simulate(config);
    }
    const ProxyDataset data = misspecify(raw, traits.misspec);

    std::optional<OutcomeBridgeFit> h_fit;
    std::optional<TreatmentBridgeFit> q_fit;
    auto h = [&]() -> const OutcomeBridgeFit& {
      if (!h_fit) {
        h_fit = fit_outcome_bridge(data, default_outcome_layout(data),
                                   default_instrument_layout(data));
      }
      return *h_fit;
    };
    auto q = [&]() -> const TreatmentBridgeFit& {
      if (!q_fit) {
        const TermLayout q_layout = default_instrument_layout(data);
        q_fit = fit_treatment_bridge(data, q_layout, mirror_layout(q_layout, data));
      }
      return *q_fit;
    };

    for (EstimatorTag tag : spec.estimators) {
      switch (tag) {
        case EstimatorTag::POR:
          record.reports.push_back(por(data, h()));
          break;
        case EstimatorTag::PIPW:
          record.reports.push_back(pipw(data, q()));
          break;
        case EstimatorTag::PDR:
          record.reports.push_back(pdr(data, h(), q()));
          break;
        case EstimatorTag::DR:
          record.reports.push_back(standard_dr(data, dr_columns(data, dr_set)));
          break;
        default:
          throw ValidationError("ATT estimators are not part of scenario studies");
      }
    }
    record.ok = true;
  } catch (const std::exception& e) {
    record.ok = false;
    record.error = e.what();
    record.reports.clear();
  }
  return record;
}

}  // namespace

StudyResult run_study(const StudySpec& spec) {
  if (spec.reps < 1) throw ValidationError("reps must be at least 1");
  if (spec.n < 1) throw ValidationError("n must be at least 1");
  if (spec.estimators.empty()) throw ValidationError("no estimators selected");

  const ScenarioTraits traits = traits_of(spec.scenario);
  const DrCovariateSet dr_set = spec.dr_covariates.value_or(traits.dr_default);

  StudyResult result;
  result.spec = spec;
  result.psi_true = scenario_psi_true(spec.scenario);
  result.reps.resize(static_cast<std::size_t>(spec.reps));

  const int workers = std::max(1, spec.workers);
  if (workers == 1) {
    for (int r = 0; r < spec.reps; ++r) {
      result.reps[static_cast<std::size_t>(r)] = run_one_rep(spec, traits, dr_set, r);
    }
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int r = next.fetch_add(1); r < spec.reps; r = next.fetch_add(1)) {
        result.reps[static_cast<std::size_t>(r)] = run_one_rep(spec, traits, dr_set, r);
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (const auto& rep : result.reps) {
    if (!rep.ok) ++result.failed_reps;
  }
  if (result.failed_reps * 20 > spec.reps) {
    std::ostringstream msg;
    msg << result.failed_reps << "/" << spec.reps << " replications failed; first errors:";
    int shown = 0;
    for (const auto& rep : result.reps) {
      if (!rep.ok && shown < 3) {
        msg << "\n  " << rep.error;
        ++shown;
      }
    }
    throw SolverError(msg.str());
  }

  for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
    EstimatorSummary summary;
    summary.tag = spec.estimators[e];
    double sum = 0.0, sum_sq = 0.0, sum_err_sq = 0.0, covered = 0.0, length = 0.0;
    int used = 0;
    for (const auto& rep : result.reps) {
      if (!rep.ok) continue;
      const EstimateReport& report = rep.reports[e];
      const double err = report.estimate - result.psi_true;
      sum += report.estimate;
      sum_sq += report.estimate * report.estimate;
      sum_err_sq += err * err;
      covered += (result.psi_true >= report.ci_low && result.psi_true <= report.ci_high) ? 1 : 0;
      length += report.ci_high - report.ci_low;
      ++used;
    }
    if (used == 0) throw SolverError("no successful replications to aggregate");
    const double mean = sum / used;
    summary.signed_bias = mean - result.psi_true;
    summary.abs_bias = std::abs(summary.signed_bias);
    summary.mse = sum_err_sq / used;
    summary.coverage = covered / used;
    summary.mean_ci_length = length / used;
    const double var = std::max(sum_sq / used - mean * mean, 0.0);
    summary.mc_se_bias = std::sqrt(var / used);
    summary.used_reps = used;
    result.summaries.push_back(summary);
  }
  return result;
}

namespace {

std::string one_decimal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

}  // namespace

std::string emit_tables(const StudyResult& result, TableFormat format) {
  // values scaled by 10^2 (coverage by 10^2 from a fraction) at one decimal
  std::vector<std::string> metric_names = {"Bias", "MSE", "Coverage", "Length"};
  std::vector<std::vector<std::string>> cells(4);
  for (const auto& s : result.summaries) {
    cells[0].push_back(one_decimal(s.abs_bias * 100.0));
    cells[1].push_back(one_decimal(s.mse * 100.0));
    cells[2].push_back(one_decimal(s.coverage * 100.0));
    cells[3].push_back(one_decimal(s.mean_ci_length * 100.0));
  }

  std::ostringstream out;
  if (format == TableFormat::Csv) {
    out << "scenario,metric";
    for (const auto& s : result.summaries) out << ',' << estimator_name(s.tag);
    out << '\n';
    for (std::size_t m = 0; m < metric_names.size(); ++m) {
      out << scenario_name(result.spec.scenario) << ',' << metric_names[m];
      for (const auto& v : cells[m]) out << ',' << v;
      out << '\n';
    }
  } else {
    out << "| " << scenario_name(result.spec.scenario) << " |";
    for (const auto& s : result.summaries) out << ' ' << estimator_name(s.tag) << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < result.summaries.size(); ++i) out << "---|";
    out << '\n';
    for (std::size_t m = 0; m < metric_names.size(); ++m) {
      out << "| " << metric_names[m] << " |";
      for (const auto& v : cells[m]) out << ' ' << v << " |";
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace proxci
