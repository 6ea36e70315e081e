// Acceptance suite: runs every gate at its stated tolerance and prints one
// pass/fail line per criterion. Exit code is the number of failed criteria.

#include <chrono>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "proxci/discrete.hpp"
#include "proxci/estimators.hpp"
#include "proxci/harness.hpp"
#include "proxci/serde.hpp"

using namespace proxci;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& details) {
  std::cout << "[" << (id < 10 ? " " : "") << id << "] " << (pass ? "PASS" : "FAIL") << "  "
            << name << "\n      " << details << "\n";
  if (!pass) ++failures;
}

void report_skip(int id, const std::string& name, const std::string& why) {
  std::cout << "[" << (id < 10 ? " " : "") << id << "] SKIP  " << name << "\n      " << why
            << "\n";
}

const EstimatorSummary& summary_of(const StudyResult& result, EstimatorTag tag) {
  for (const auto& s : result.summaries) {
    if (s.tag == tag) return s;
  }
  throw std::logic_error("estimator missing from study");
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

int hardware_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 2 : static_cast<int>(std::min(hc, 8u));
}

StudySpec scenario_spec(Scenario scenario) {
  StudySpec spec;
  spec.scenario = scenario;
  spec.reps = 500;
  spec.n = 2000;
  spec.base_seed = 1;
  spec.workers = hardware_workers();
  return spec;
}

struct Fits {
  OutcomeBridgeFit h;
  TreatmentBridgeFit q;
};

Fits fit_bridges(const ProxyDataset& d) {
  Fits fits;
  fits.h = fit_outcome_bridge(d, default_outcome_layout(d), default_instrument_layout(d));
  const TermLayout q_layout = default_instrument_layout(d);
  fits.q = fit_treatment_bridge(d, q_layout, mirror_layout(q_layout, d));
  return fits;
}

}  // namespace

int main(int argc, char** argv) {
  std::string rhc_path;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--rhc") == 0) rhc_path = argv[i + 1];
  }
  std::cout << "acceptance suite, " << hardware_workers() << " workers\n\n";

  // ---- criteria 1-2: Scenario 1 tables -----------------------------------
  StudyResult s1;
  double s1_seconds = 0.0;
  {
    const auto start = Clock::now();
    s1 = run_study(scenario_spec(Scenario::S1));
    s1_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  }
  {
    const auto& por_s = summary_of(s1, EstimatorTag::POR);
    const auto& pipw_s = summary_of(s1, EstimatorTag::PIPW);
    const auto& pdr_s = summary_of(s1, EstimatorTag::PDR);
    const auto& dr_s = summary_of(s1, EstimatorTag::DR);
    bool pass = true;
    for (const auto* s : {&por_s, &pipw_s, &pdr_s}) {
      pass = pass && s->abs_bias <= 0.02 && s->mse >= 0.004 && s->mse <= 0.012;
    }
    pass = pass && dr_s.abs_bias >= 0.06 && s1_seconds <= 300.0;
    report(1, pass, "Table 1 Scenario 1: bias/MSE of POR, PIPW, PDR; DR bias; runtime",
           "bias POR " + fmt(por_s.abs_bias) + ", PIPW " + fmt(pipw_s.abs_bias) + ", PDR " +
               fmt(pdr_s.abs_bias) + " (<=0.02); MSE " + fmt(por_s.mse) + "/" +
               fmt(pipw_s.mse) + "/" + fmt(pdr_s.mse) + " (in [0.004,0.012]); DR bias " +
               fmt(dr_s.abs_bias) + " (>=0.06); " + fmt(s1_seconds) + "s (<=300); failed reps " +
               std::to_string(s1.failed_reps));

    pass = true;
    for (const auto* s : {&por_s, &pipw_s, &pdr_s}) {
      pass = pass && s->coverage >= 0.93 && s->coverage <= 0.98;
    }
    pass = pass && dr_s.coverage <= 0.40 && pdr_s.mean_ci_length >= 0.28 &&
           pdr_s.mean_ci_length <= 0.40;
    report(2, pass, "Table 2 Scenario 1: coverage and PDR interval length",
           "coverage POR " + fmt(por_s.coverage) + ", PIPW " + fmt(pipw_s.coverage) + ", PDR " +
               fmt(pdr_s.coverage) + " (in [0.93,0.98]); DR " + fmt(dr_s.coverage) +
               " (<=0.40); PDR length " + fmt(pdr_s.mean_ci_length) + " (in [0.28,0.40])");
  }

  // ---- criterion 3: Scenario 2 -------------------------------------------
  try {
    const StudyResult s2 = run_study(scenario_spec(Scenario::S2));
    const auto& por_s = summary_of(s2, EstimatorTag::POR);
    const auto& pipw_s = summary_of(s2, EstimatorTag::PIPW);
    const auto& pdr_s = summary_of(s2, EstimatorTag::PDR);
    const bool pipw_ok = pipw_s.abs_bias <= 0.03 && pipw_s.coverage >= 0.93;
    const bool pdr_ok = pdr_s.abs_bias <= 0.03 && pdr_s.coverage >= 0.93;
    const bool por_ok = por_s.abs_bias >= 0.4 && por_s.coverage <= 0.30;
    report(3, pipw_ok && pdr_ok && por_ok,
           "Scenario 2 (h wrong): PIPW/PDR robust, POR biased",
           "PIPW bias " + fmt(pipw_s.abs_bias) + " cov " + fmt(pipw_s.coverage) + "; PDR bias " +
               fmt(pdr_s.abs_bias) + " cov " + fmt(pdr_s.coverage) + "; POR bias " +
               fmt(por_s.abs_bias) + " (>=0.4 required) cov " + fmt(por_s.coverage) +
               " (<=0.30 required); failed reps " + std::to_string(s2.failed_reps));
  } catch (const std::exception& e) {
    report(3, false, "Scenario 2 (h wrong): PIPW/PDR robust, POR biased",
           std::string("study aborted: ") + e.what());
  }

  // ---- criterion 4: Scenario 3 -------------------------------------------
  try {
    const StudyResult s3 = run_study(scenario_spec(Scenario::S3));
    const auto& por_s = summary_of(s3, EstimatorTag::POR);
    const auto& pipw_s = summary_of(s3, EstimatorTag::PIPW);
    const auto& pdr_s = summary_of(s3, EstimatorTag::PDR);
    const bool por_ok = por_s.abs_bias <= 0.03 && por_s.coverage >= 0.93;
    const bool pdr_ok = pdr_s.abs_bias <= 0.03 && pdr_s.coverage >= 0.93;
    const bool pipw_ok = pipw_s.abs_bias >= 0.12 && pipw_s.coverage <= 0.45;
    report(4, por_ok && pdr_ok && pipw_ok,
           "Scenario 3 (q wrong): POR/PDR robust, PIPW biased",
           "POR bias " + fmt(por_s.abs_bias) + " cov " + fmt(por_s.coverage) + "; PDR bias " +
               fmt(pdr_s.abs_bias) + " cov " + fmt(pdr_s.coverage) + "; PIPW bias " +
               fmt(pipw_s.abs_bias) + " (>=0.12 required) cov " + fmt(pipw_s.coverage) +
               " (<=0.45 required); failed reps " + std::to_string(s3.failed_reps));
  } catch (const std::exception& e) {
    report(4, false, "Scenario 3 (q wrong): POR/PDR robust, PIPW biased",
           std::string("study aborted: ") + e.what());
  }

  // ---- criterion 5: Scenario 4 -------------------------------------------
  try {
    const StudyResult s4 = run_study(scenario_spec(Scenario::S4));
    const auto& por_s = summary_of(s4, EstimatorTag::POR);
    const auto& pipw_s = summary_of(s4, EstimatorTag::PIPW);
    const auto& pdr_s = summary_of(s4, EstimatorTag::PDR);
    const auto& dr_s = summary_of(s4, EstimatorTag::DR);
    const bool pass = por_s.coverage < 0.95 && pipw_s.coverage < 0.95 && pdr_s.coverage < 0.95 &&
                      dr_s.coverage <= 0.15;
    report(5, pass, "Scenario 4 (both wrong): no estimator keeps nominal coverage",
           "coverage POR " + fmt(por_s.coverage) + ", PIPW " + fmt(pipw_s.coverage) + ", PDR " +
               fmt(pdr_s.coverage) + " (<0.95 each); DR " + fmt(dr_s.coverage) +
               " (<=0.15); failed reps " + std::to_string(s4.failed_reps));
  } catch (const std::exception& e) {
    report(5, false, "Scenario 4 (both wrong): no estimator keeps nominal coverage",
           std::string("study aborted: ") + e.what());
  }

  // ---- criterion 6: Appendix no-confounding scenario ----------------------
  try {
    const StudyResult i1 = run_study(scenario_spec(Scenario::I1_S1));
    const auto& dr_s = summary_of(i1, EstimatorTag::DR);
    const auto& pdr_s = summary_of(i1, EstimatorTag::PDR);
    const bool pass = dr_s.abs_bias <= 0.03 && dr_s.coverage >= 0.92 && dr_s.coverage <= 0.98 &&
                      pdr_s.abs_bias <= 0.03 && pdr_s.coverage >= 0.92 && pdr_s.coverage <= 0.98;
    report(6, pass, "No confounding: DR and PDR both unbiased with nominal coverage",
           "DR bias " + fmt(dr_s.abs_bias) + " cov " + fmt(dr_s.coverage) + "; PDR bias " +
               fmt(pdr_s.abs_bias) + " cov " + fmt(pdr_s.coverage));
  } catch (const std::exception& e) {
    report(6, false, "No confounding: DR and PDR both unbiased with nominal coverage",
           std::string("study aborted: ") + e.what());
  }

  // ---- criterion 7: double robustness at n = 1e6 --------------------------
  {
    SimConfig config;
    config.n = 1000000;
    config.seed = 7001;
    const ProxyDataset base = simulate(config);

    const ProxyDataset wrong_q = misspecify(base, Misspec::ZStar3);
    const Fits fits_q = fit_bridges(wrong_q);
    const double pdr_wrong_q = pdr_point_at(wrong_q, fits_q.h, fits_q.q, fits_q.h.coef,
                                            fits_q.q.coef);

    const ProxyDataset wrong_h = misspecify(base, Misspec::WStar3);
    const Fits fits_h = fit_bridges(wrong_h);
    const double pdr_wrong_h = pdr_point_at(wrong_h, fits_h.h, fits_h.q, fits_h.h.coef,
                                            fits_h.q.coef);

    const bool pass = std::abs(pdr_wrong_q - 2.0) <= 0.03 && std::abs(pdr_wrong_h - 2.0) <= 0.03;
    report(7, pass, "Double robustness oracle at n = 1e6",
           "PDR with wrong q " + fmt(pdr_wrong_q) + ", with wrong h " + fmt(pdr_wrong_h) +
               " (|err| <= 0.03 of 2)");
  }

  // ---- criterion 8: AIPW reduction ----------------------------------------
  {
    double worst = 0.0;
    for (std::uint64_t seed : {11u, 12u}) {
      SimConfig config;
      config.n = 3000;
      config.seed = seed;
      ProxyDataset d = simulate(config);
      d.z = d.w;
      const std::vector<ColumnRef> l_cols = {{Source::W, 0}, {Source::X, 0}, {Source::X, 1}};
      const DrNuisances nu = standard_dr_nuisances(d, l_cols);
      const double dr_value = dr_point(d.a, d.y, nu.fhat, nu.yhat, nu.yhat1, nu.yhat0);
      VectorXd q(d.n());
      for (Index i = 0; i < d.n(); ++i) q(i) = 1.0 / nu.fhat(i);
      const double pdr_value = pdr_point(d.a, d.y, q, nu.yhat, nu.yhat1, nu.yhat0);
      worst = std::max(worst, std::abs(pdr_value - dr_value));
    }
    report(8, worst <= 1e-10, "AIPW reduction: PDR with q = 1/f and h = OLS equals standard DR",
           "max |PDR - DR| = " + fmt(worst) + " (<=1e-10)");
  }

  // ---- criterion 9: discrete identification vs oracle ----------------------
  {
    const auto start = Clock::now();
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      const Index d = rep % 2 == 0 ? 2 : 3;
      const Index d_x = rep % 3 == 0 ? 2 : 1;
      const CategoricalLaw law =
          random_structured_law(d, d_x, 2, 40000 + static_cast<std::uint64_t>(rep));
      const ObservableLaw obs = marginalize_u(law);
      for (Index a = 0; a < 2; ++a) {
        worst = std::max(
            worst,
            (identify_counterfactual(obs, a) - oracle_counterfactual(law, a)).cwiseAbs().maxCoeff());
      }
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    report(9, worst < 1e-8 && seconds <= 60.0,
           "Discrete identification: 1000 random structured laws vs brute-force oracle",
           "max deviation " + fmt(worst) + " (<1e-8) in " + fmt(seconds) + "s (<=60)");
  }

  // ---- criterion 10: solver certificates -----------------------------------
  {
    double worst_cert = 0.0;
    int fits_checked = 0;
    for (Misspec misspec : {Misspec::None, Misspec::WStar3, Misspec::ZStar3, Misspec::BothStar1}) {
      for (int rep = 0; rep < 25; ++rep) {
        SimConfig config;
        config.n = 2000;
        config.seed = replication_seed(1, static_cast<std::uint64_t>(rep));
        const ProxyDataset d = misspecify(simulate(config), misspec);
        try {
          const Fits fits = fit_bridges(d);
          worst_cert = std::max(
              worst_cert, outcome_bridge_moment(d, fits.h, fits.h.coef).lpNorm<Eigen::Infinity>());
          worst_cert = std::max(
              worst_cert,
              treatment_bridge_moment(d, fits.q, fits.q.coef).lpNorm<Eigen::Infinity>());
          const auto h_att = fit_att_outcome_bridge(d, att_outcome_layout(d),
                                                    att_instrument_layout(d));
          const auto q_att = fit_att_treatment_bridge(d, att_instrument_layout(d),
                                                      att_outcome_layout(d));
          worst_cert = std::max(
              worst_cert, outcome_bridge_moment(d, h_att, h_att.coef).lpNorm<Eigen::Infinity>());
          worst_cert = std::max(
              worst_cert,
              treatment_bridge_moment(d, q_att, q_att.coef).lpNorm<Eigen::Infinity>());
          fits_checked += 4;
        } catch (const SolverError&) {
          // non-converged fits carry no certificate; the harness excludes them
        }
      }
    }

    double worst_jac = 0.0;
    std::mt19937_64 rng(31337);
    std::normal_distribution<double> gauss;
    for (int rep = 0; rep < 100; ++rep) {
      SimConfig config;
      config.n = 60;
      config.seed = 90000 + static_cast<std::uint64_t>(rep);
      const ProxyDataset d = simulate(config);
      TreatmentBridgeFit probe;
      probe.att_form = rep % 2 == 1;
      probe.layout = probe.att_form ? att_instrument_layout(d) : default_instrument_layout(d);
      probe.target_layout = probe.att_form ? att_outcome_layout(d)
                                           : mirror_layout(probe.layout, d);
      VectorXd t(probe.layout.dim());
      for (Index j = 0; j < t.size(); ++j) t(j) = 0.4 * gauss(rng);
      const MatrixXd analytic = treatment_bridge_jacobian(d, probe, t);
      MatrixXd fd(analytic.rows(), analytic.cols());
      for (Index j = 0; j < t.size(); ++j) {
        VectorXd up = t, down = t;
        up(j) += 1e-6;
        down(j) -= 1e-6;
        fd.col(j) =
            (treatment_bridge_moment(d, probe, up) - treatment_bridge_moment(d, probe, down)) /
            2e-6;
      }
      worst_jac = std::max(worst_jac, (analytic - fd).lpNorm<Eigen::Infinity>() /
                                          std::max(1.0, analytic.lpNorm<Eigen::Infinity>()));
    }
    report(10, worst_cert <= 1e-9 && worst_jac <= 1e-5,
           "Solver certificates: re-evaluated residuals and analytic Jacobian",
           "worst recomputed residual " + fmt(worst_cert) + " (<=1e-9) over " +
               std::to_string(fits_checked) + " fits; worst Jacobian rel. error " +
               fmt(worst_jac) + " (<=1e-5) over 100 instances");
  }

  // ---- criterion 11: sandwich vs bootstrap ---------------------------------
  {
    SimConfig config;
    config.n = 2000;
    config.seed = 1;
    const ProxyDataset d = simulate(config);
    const Fits fits = fit_bridges(d);
    const EstimateReport report_pdr = pdr(d, fits.h, fits.q);

    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<Index> pick(0, d.n() - 1);
    std::vector<double> boot;
    boot.reserve(2000);
    int boot_failures = 0;
    for (int b = 0; b < 2000; ++b) {
      std::vector<Index> rows(static_cast<std::size_t>(d.n()));
      for (auto& r : rows) r = pick(rng);
      const ProxyDataset resample = d.subset(rows);
      try {
        const Fits refit = fit_bridges(resample);
        boot.push_back(pdr_point_at(resample, refit.h, refit.q, refit.h.coef, refit.q.coef));
      } catch (const SolverError&) {
        ++boot_failures;
      }
    }
    double mean = 0.0;
    for (double v : boot) mean += v;
    mean /= static_cast<double>(boot.size());
    double var = 0.0;
    for (double v : boot) var += (v - mean) * (v - mean);
    var /= static_cast<double>(boot.size() - 1);
    const double boot_se = std::sqrt(var);
    const double ratio = report_pdr.std_err / boot_se;

    // sample-mean stack against the closed form
    EstimatingStack stack;
    stack.dim = 1;
    stack.n_obs = d.n();
    stack.score = [&d](Index i, const VectorXd& phi, VectorXd& out) { out(0) = phi(0) - d.y(i); };
    const MatrixXd cov = sandwich_variance(stack, VectorXd::Constant(1, d.y.mean()));
    const double closed_form =
        std::sqrt((d.y.array() - d.y.mean()).square().sum() / d.n()) / std::sqrt(double(d.n()));
    const double mean_gap = std::abs(std::sqrt(cov(0, 0)) - closed_form);

    report(11, ratio >= 0.85 && ratio <= 1.15 && mean_gap <= 1e-10,
           "Sandwich validity: PDR SE vs 2000-replicate bootstrap; sample-mean stack",
           "sandwich " + fmt(report_pdr.std_err) + ", bootstrap " + fmt(boot_se) + " (ratio " +
               fmt(ratio) + ", within 15%); " + std::to_string(boot_failures) +
               " bootstrap refits failed; sample-mean gap " + fmt(mean_gap) + " (<=1e-10)");
  }

  // ---- criterion 12: mechanism constraints ---------------------------------
  {
    bool pass = true;
    std::string detail;
    const SimConfig defaults;
    const SimConfig i1 = no_confounding_config();
    const SimConfig i3 = weak_zw_config();
    for (const auto& [name, config] : {std::pair<const char*, SimConfig>{"default", defaults},
                                       {"no_confounding", i1},
                                       {"weak_zw", i3}}) {
      try {
        validate_config(config);  // C1 and C2 at 1e-10
        const DerivedParams dp = derive_params(config, config.t_0, config.t_x);
        const double sw2 = config.sigma(1, 1), swu = config.sigma(1, 2);
        const double lhs = dp.t_z * dp.theta_u * dp.var_u_given_wax;
        const double rhs = -(config.kappa_a - swu * config.mu_a / sw2);
        const double id1 = std::abs(lhs - rhs);
        const double id2 =
            std::abs(dp.t_a + dp.t_z * dp.t_z * dp.var_z_given_uax + dp.t_z * dp.theta_a);
        pass = pass && id1 <= 1e-10 && id2 <= 1e-10;
        detail += std::string(name) + " ids (" + fmt(id1) + ", " + fmt(id2) + "); ";
      } catch (const std::exception& e) {
        pass = false;
        detail += std::string(name) + " invalid: " + e.what() + "; ";
      }
    }
    const DerivedParams dp = derive_params(defaults, defaults.t_0, defaults.t_x);
    const DerivedParams dp3 = derive_params(i3, i3.t_0, i3.t_x);
    pass = pass && std::abs(dp.t_z + 0.5) <= 1e-12 && std::abs(dp.t_a + 0.125) <= 1e-12;
    pass = pass && std::abs(dp3.t_z + 0.5) <= 1e-12 && std::abs(dp3.t_a + 0.125) <= 1e-12;
    const DerivedParams dp1 = derive_params(i1, i1.t_0, i1.t_x);
    pass = pass && std::abs(dp1.t_z) <= 1e-12 && std::abs(dp1.t_a) <= 1e-12;
    report(12, pass, "Mechanism constraints and closed-form bridge truth",
           detail + "t_z " + fmt(dp.t_z) + " (= -0.5 exact), t_a " + fmt(dp.t_a) +
               " (= -0.125 exact)");
  }

  // ---- criterion 13: external data reproduction (optional) -----------------
  if (rhc_path.empty()) {
    report_skip(13, "Health-records reproduction (external dataset)",
                "no dataset supplied (pass --rhc <csv>); non-gating, depends on matching the "
                "original preprocessing");
  } else {
    try {
      const CsvTable table = read_csv_file(rhc_path);
      RoleMap roles;
      roles.y = "Y";
      roles.a = "A";
      for (const auto& name : table.header) {
        if (name == "pafi1" || name == "paco21") {
          roles.z.push_back(name);
        } else if (name == "ph1" || name == "hema1") {
          roles.w.push_back(name);
        } else if (name != "Y" && name != "A") {
          roles.x.push_back(name);
        }
      }
      const ProxyDataset d = validate_dataset(table, roles);
      TermLayout h_layout = default_outcome_layout(d);
      TermLayout q_layout = default_instrument_layout(d);
      for (Index j = 0; j < d.pz(); ++j) {
        q_layout.interactions_with_a.push_back({Source::Z, static_cast<int>(j)});
      }
      for (Index j = 0; j < d.px(); ++j) {
        q_layout.interactions_with_a.push_back({Source::X, static_cast<int>(j)});
      }
      const auto h_fit = fit_outcome_bridge(d, h_layout, mirror_layout(h_layout, d));
      const auto q_fit = fit_treatment_bridge(d, q_layout, mirror_layout(q_layout, d));
      const EstimateReport r = pdr(d, h_fit, q_fit);
      const bool pass = std::abs(r.estimate - (-1.66)) <= 0.15;
      std::cout << "[13] " << (pass ? "PASS" : "FAIL") << " (non-gating)  "
                << "Health-records reproduction\n      PDR " << fmt(r.estimate) << " ("
                << fmt(r.std_err) << "), reference -1.66 (0.43)\n";
    } catch (const std::exception& e) {
      report_skip(13, "Health-records reproduction (external dataset)",
                  std::string("failed to run: ") + e.what());
    }
  }

  if (failures == 0) {
    std::cout << "\nALL GATING CRITERIA PASSED\n";
  } else {
    std::cout << "\nFAILED GATING CRITERIA: " << failures << "\n";
  }
  return failures;
}
