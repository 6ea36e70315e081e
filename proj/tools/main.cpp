#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "proxci/serde.hpp"

namespace {

using namespace proxci;

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitSolver = 4;
constexpr int kExitIdentification = 5;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ValidationError("cannot open output file: " + out_path);
  out << text;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_simulate(const std::string& config_path, Index n, std::uint64_t seed,
                 const std::string& mode, bool with_latent, const std::string& out_path,
                 bool violation) {
  if (violation) {
    ViolationConfig vc;
    vc.n = n;
    vc.seed = seed;
    const ProxyDataset data = simulate_violation(vc);
    std::ostringstream csv;
    write_dataset_csv(csv, data, with_latent);
    emit(csv.str(), out_path);
    std::cerr << "violation mechanism: n=" << n << " seed=" << seed << " true ATE=0.5\n";
    return 0;
  }

  SimConfig config;
  if (!config_path.empty()) config = sim_config_from_json_text(slurp(config_path));
  if (n > 0) config.n = n;
  config.seed = seed;
  if (mode == "appendix_h_consistent") {
    config.propensity_mode = PropensityMode::AppendixConsistent;
  } else if (mode == "section51_logistic") {
    config.propensity_mode = PropensityMode::PlainLogistic;
  } else if (!mode.empty()) {
    throw ValidationError("unknown propensity mode: " + mode);
  }

  const DerivedParams d = derive_params(config, config.t_0, config.t_x);
  const ProxyDataset data = simulate(config);
  std::ostringstream csv;
  write_dataset_csv(csv, data, with_latent);
  emit(csv.str(), out_path);
  std::cerr << "derived: t_0=" << d.t_0 << " t_z=" << d.t_z << " t_a=" << d.t_a
            << " psi_true=" << d.psi_true << "\n";
  return 0;
}

int cmd_mc(const std::string& scenario, int reps, Index n, std::uint64_t seed,
           const std::string& estimators, int workers, const std::string& format,
           const std::string& out_path, const std::string& records_path,
           const std::string& dr_covariates) {
  if (reps < 1) throw ValidationError("--reps must be at least 1");
  StudySpec spec;
  spec.scenario = parse_scenario(scenario);
  spec.reps = reps;
  spec.n = n;
  spec.base_seed = seed;
  spec.workers = workers;
  if (!estimators.empty()) {
    spec.estimators.clear();
    for (const auto& name : split_list(estimators)) {
      spec.estimators.push_back(parse_estimator(name));
    }
  }
  if (!dr_covariates.empty()) {
    if (dr_covariates == "xzw") {
      spec.dr_covariates = DrCovariateSet::XZW;
    } else if (dr_covariates == "x") {
      spec.dr_covariates = DrCovariateSet::XOnly;
    } else {
      throw ValidationError("--dr-covariates must be xzw or x");
    }
  }

  const StudyResult result = run_study(spec);
  const TableFormat fmt = format == "markdown" ? TableFormat::Markdown : TableFormat::Csv;
  emit(emit_tables(result, fmt), out_path);
  std::cerr << "scenario " << scenario << ": psi_true=" << result.psi_true << ", "
            << result.failed_reps << "/" << spec.reps << " replications failed\n";
  for (const auto& s : result.summaries) {
    std::cerr << "  " << estimator_name(s.tag) << ": bias=" << s.signed_bias
              << " (mc se " << s.mc_se_bias << "), mse=" << s.mse
              << ", coverage=" << s.coverage << ", length=" << s.mean_ci_length << "\n";
  }
  if (!records_path.empty()) {
    std::ofstream rec(records_path);
    if (!rec) throw ValidationError("cannot open records file: " + records_path);
    rec << "rep,ok,estimator,estimate,std_err,ci_low,ci_high\n";
    for (std::size_t r = 0; r < result.reps.size(); ++r) {
      const auto& rr = result.reps[r];
      if (!rr.ok) {
        rec << r << ",0,,,,,\n";
        continue;
      }
      for (const auto& report : rr.reports) {
        rec << r << ",1," << estimator_name(report.estimator) << ',' << report.estimate << ','
            << report.std_err << ',' << report.ci_low << ',' << report.ci_high << '\n';
      }
    }
  }
  return 0;
}

RoleMap infer_roles(const CsvTable& table) {
  RoleMap roles;
  for (const auto& name : table.header) {
    if (name == "Y") {
      roles.y = name;
    } else if (name == "A") {
      roles.a = name;
    } else if (name.size() > 1 && name[0] == 'X') {
      roles.x.push_back(name);
    } else if (name.size() > 1 && name[0] == 'Z') {
      roles.z.push_back(name);
    } else if (name.size() > 1 && name[0] == 'W') {
      roles.w.push_back(name);
    }
  }
  if (roles.y.empty() || roles.a.empty()) {
    throw ValidationError(
        "cannot infer roles from header; supply --y/--a/--x/--z/--w or a config file");
  }
  return roles;
}

struct ResolvedLayouts {
  TermLayout h, h_instrument, q, q_target;
};

ColumnRef resolve_column(const RoleMap& roles, const std::string& name) {
  for (std::size_t j = 0; j < roles.x.size(); ++j) {
    if (roles.x[j] == name) return {Source::X, static_cast<int>(j)};
  }
  for (std::size_t j = 0; j < roles.z.size(); ++j) {
    if (roles.z[j] == name) return {Source::Z, static_cast<int>(j)};
  }
  for (std::size_t j = 0; j < roles.w.size(); ++j) {
    if (roles.w[j] == name) return {Source::W, static_cast<int>(j)};
  }
  throw ValidationError("interaction column \"" + name + "\" is not an X/Z/W role column");
}

ResolvedLayouts resolve_layouts(const ProxyDataset& data, const AnalysisConfig& config,
                                bool att) {
  ResolvedLayouts layouts;
  layouts.h = att ? att_outcome_layout(data) : default_outcome_layout(data);
  layouts.q = att ? att_instrument_layout(data) : default_instrument_layout(data);
  for (const auto& name : config.h_interactions_with_a) {
    layouts.h.interactions_with_a.push_back(resolve_column(config.roles, name));
  }
  for (const auto& name : config.q_interactions_with_a) {
    layouts.q.interactions_with_a.push_back(resolve_column(config.roles, name));
  }
  layouts.h_instrument = mirror_layout(layouts.h, data);
  layouts.q_target = mirror_layout(layouts.q, data);
  return layouts;
}

std::vector<ColumnRef> dr_columns_for(const ProxyDataset& data, const std::string& set) {
  std::vector<ColumnRef> cols;
  for (Index j = 0; j < data.px(); ++j) cols.push_back({Source::X, static_cast<int>(j)});
  if (set == "xzw") {
    for (Index j = 0; j < data.pz(); ++j) cols.push_back({Source::Z, static_cast<int>(j)});
    for (Index j = 0; j < data.pw(); ++j) cols.push_back({Source::W, static_cast<int>(j)});
  } else if (set != "x") {
    throw ValidationError("dr_covariates must be \"xzw\" or \"x\"");
  }
  return cols;
}

int cmd_estimate(AnalysisConfig config) {
  if (config.input.empty()) throw ValidationError("no input CSV given (--data or config input)");
  const CsvTable table = read_csv_file(config.input);
  if (config.roles.y.empty() && config.roles.a.empty()) config.roles = infer_roles(table);
  const ProxyDataset data = validate_dataset(table, config.roles);

  const bool att = config.target == "att";
  if (!att && config.target != "ate") {
    throw ValidationError("target must be \"ate\" or \"att\"");
  }
  std::vector<std::string> wanted = config.estimators;
  if (wanted.empty()) {
    wanted = att ? std::vector<std::string>{"ATT_OR", "ATT_IPW", "ATT_DR"}
                 : std::vector<std::string>{"POR", "PIPW", "PDR", "DR"};
  }

  const ResolvedLayouts layouts = resolve_layouts(data, config, att);
  std::vector<EstimateReport> reports;
  if (att) {
    const auto h_fit = fit_att_outcome_bridge(data, layouts.h, layouts.h_instrument);
    const auto q_fit = fit_att_treatment_bridge(data, layouts.q, layouts.q_target);
    const AttReports all = att_estimators(data, h_fit, q_fit);
    for (const auto& name : wanted) {
      switch (parse_estimator(name)) {
        case EstimatorTag::ATT_OR:
          reports.push_back(all.outcome_regression);
          break;
        case EstimatorTag::ATT_IPW:
          reports.push_back(all.ipw);
          break;
        case EstimatorTag::ATT_DR:
          reports.push_back(all.doubly_robust);
          break;
        default:
          throw ValidationError("estimator " + name + " is not an ATT estimator");
      }
    }
  } else {
    std::optional<OutcomeBridgeFit> h_fit;
    std::optional<TreatmentBridgeFit> q_fit;
    auto h = [&]() -> const OutcomeBridgeFit& {
      if (!h_fit) h_fit = fit_outcome_bridge(data, layouts.h, layouts.h_instrument);
      return *h_fit;
    };
    auto q = [&]() -> const TreatmentBridgeFit& {
      if (!q_fit) q_fit = fit_treatment_bridge(data, layouts.q, layouts.q_target);
      return *q_fit;
    };
    for (const auto& name : wanted) {
      switch (parse_estimator(name)) {
        case EstimatorTag::POR:
          reports.push_back(por(data, h()));
          break;
        case EstimatorTag::PIPW:
          reports.push_back(pipw(data, q()));
          break;
        case EstimatorTag::PDR:
          reports.push_back(pdr(data, h(), q()));
          break;
        case EstimatorTag::DR:
          reports.push_back(standard_dr(data, dr_columns_for(data, config.dr_covariates)));
          break;
        default:
          throw ValidationError("estimator " + name + " needs --target att");
      }
    }
  }

  for (const auto& report : reports) {
    std::cerr << estimator_name(report.estimator) << ": " << report.estimate << " ("
              << report.std_err << "), 95% CI [" << report.ci_low << ", " << report.ci_high
              << "]\n";
  }
  emit(reports_to_json_text(reports, data.n()), config.output);
  return 0;
}

int cmd_identify(const std::string& law_path, bool oracle, const std::string& out_path) {
  const LawFile file = law_from_json_text(slurp(law_path));
  const MatrixXd cf0 = identify_counterfactual(file.observable, 0);
  const MatrixXd cf1 = identify_counterfactual(file.observable, 1);
  VectorXd y_values(static_cast<Index>(file.observable.y_values.size()));
  for (Index i = 0; i < y_values.size(); ++i) {
    y_values(i) = file.observable.y_values[static_cast<std::size_t>(i)];
  }
  const double ate = ate_from_law(cf0, cf1, y_values, file.observable.x_weights());

  std::ostringstream out;
  out << "{\n  \"counterfactual\": {\n";
  auto print_matrix = [&](const MatrixXd& m) {
    out << "[";
    for (Index x = 0; x < m.rows(); ++x) {
      out << (x ? ", [" : "[");
      for (Index y = 0; y < m.cols(); ++y) out << (y ? ", " : "") << m(x, y);
      out << "]";
    }
    out << "]";
  };
  out << "    \"a0\": ";
  print_matrix(cf0);
  out << ",\n    \"a1\": ";
  print_matrix(cf1);
  out << "\n  },\n  \"ate\": " << ate;
  if (oracle) {
    if (!file.has_latent) {
      throw ValidationError("--oracle requires a law file with a latent u axis");
    }
    const MatrixXd ocf0 = oracle_counterfactual(file.latent, 0);
    const MatrixXd ocf1 = oracle_counterfactual(file.latent, 1);
    const double dev = std::max((cf0 - ocf0).cwiseAbs().maxCoeff(),
                                (cf1 - ocf1).cwiseAbs().maxCoeff());
    out << ",\n  \"oracle_max_abs_deviation\": " << dev;
    std::cerr << "oracle max abs deviation: " << dev << "\n";
  }
  out << "\n}\n";
  emit(out.str(), out_path);
  return 0;
}

int cmd_diagnose(AnalysisConfig config) {
  if (config.input.empty()) throw ValidationError("no input CSV given (--data or config input)");
  const CsvTable table = read_csv_file(config.input);
  if (config.roles.y.empty() && config.roles.a.empty()) config.roles = infer_roles(table);
  const ProxyDataset data = validate_dataset(table, config.roles);

  const auto diag = partial_correlation_diagnostic(data);
  std::ostringstream out;
  out << "partial correlations of (Z_j, W_k) given (1, X, A), with p-values\n";
  for (Index j = 0; j < diag.r.rows(); ++j) {
    for (Index k = 0; k < diag.r.cols(); ++k) {
      out << "  Z" << j + 1 << " x W" << k + 1 << ": r=" << diag.r(j, k)
          << " p=" << diag.p_value(j, k) << "\n";
    }
  }
  for (const auto& note : diag.notes) out << "  note: " << note << "\n";

  const ResolvedLayouts layouts = resolve_layouts(data, config, false);
  try {
    const auto h_fit = fit_outcome_bridge(data, layouts.h, layouts.h_instrument);
    out << "outcome-bridge moment condition: " << h_fit.gram_condition << "\n";
  } catch (const std::exception& e) {
    out << "outcome-bridge moment system: " << e.what() << "\n";
  }
  try {
    const auto q_fit = fit_treatment_bridge(data, layouts.q, layouts.q_target);
    const MatrixXd jac = treatment_bridge_jacobian(data, q_fit, q_fit.coef);
    Eigen::JacobiSVD<MatrixXd> svd(jac);
    const auto& s = svd.singularValues();
    out << "treatment-bridge Jacobian condition: " << s(0) / s(s.size() - 1) << " ("
        << q_fit.iterations << " iterations)\n";
  } catch (const std::exception& e) {
    out << "treatment-bridge fit: " << e.what() << "\n";
  }
  emit(out.str(), config.output);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proximal causal inference: simulation, estimation, and diagnostics"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a dataset from the built-in mechanisms");
  std::string sim_config, sim_mode, sim_out;
  Index sim_n = 0;
  std::uint64_t sim_seed = 0;
  bool sim_latent = false, sim_violation = false;
  sim->add_option("--config", sim_config, "mechanism config JSON");
  sim->add_option("--n", sim_n, "sample size (overrides config)");
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("--mode", sim_mode, "appendix_h_consistent | section51_logistic");
  sim->add_flag("--with-latent", sim_latent, "include the latent U column");
  sim->add_flag("--violation", sim_violation, "use the independence-violation mechanism");
  sim->add_option("--out", sim_out, "output CSV path (default stdout)");

  // mc
  auto* mc = app.add_subcommand("mc", "run a replicated simulation study");
  std::string mc_scenario = "S1", mc_estimators, mc_format = "markdown", mc_out, mc_records,
              mc_drcov;
  int mc_reps = 500, mc_workers = 1;
  Index mc_n = 2000;
  std::uint64_t mc_seed = 1;
  mc->add_option("--scenario", mc_scenario, "S1..S4, I1_S1..I1_S4, I2_S1.., I3_S1..");
  mc->add_option("--reps", mc_reps, "number of replications")->check(CLI::PositiveNumber);
  mc->add_option("--n", mc_n, "sample size per replication");
  mc->add_option("--seed", mc_seed, "base seed");
  mc->add_option("--estimators", mc_estimators, "comma list, e.g. DR,POR,PIPW,PDR");
  mc->add_option("--workers", mc_workers, "parallel workers");
  mc->add_option("--format", mc_format, "markdown | csv");
  mc->add_option("--out", mc_out, "table output path (default stdout)");
  mc->add_option("--records", mc_records, "per-replication CSV dump path");
  mc->add_option("--dr-covariates", mc_drcov, "xzw | x (baseline DR adjustment set)");

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate effects from a CSV dataset");
  AnalysisConfig analysis;
  std::string est_config, est_x, est_z, est_w, est_hint, est_qint, est_estimators;
  est->add_option("--data", analysis.input, "input CSV");
  est->add_option("--config", est_config, "analysis config JSON (overrides flags)");
  est->add_option("--y", analysis.roles.y, "outcome column");
  est->add_option("--a", analysis.roles.a, "treatment column");
  est->add_option("--x", est_x, "comma list of X columns");
  est->add_option("--z", est_z, "comma list of Z proxy columns");
  est->add_option("--w", est_w, "comma list of W proxy columns");
  est->add_option("--h-interactions", est_hint, "columns interacted with A in h");
  est->add_option("--q-interactions", est_qint, "columns interacted with A in q");
  est->add_option("--estimators", est_estimators, "comma list of estimator tags");
  est->add_option("--target", analysis.target, "ate | att");
  est->add_option("--dr-covariates", analysis.dr_covariates, "xzw | x");
  est->add_option("--out", analysis.output, "report JSON path (default stdout)");

  // identify-discrete
  auto* idd = app.add_subcommand("identify-discrete",
                                 "matrix identification for a finite categorical law");
  std::string idd_law, idd_out;
  bool idd_oracle = false;
  idd->add_option("--law", idd_law, "law JSON file")->required();
  idd->add_flag("--oracle", idd_oracle, "cross-check against the latent-law oracle");
  idd->add_option("--out", idd_out, "output path (default stdout)");

  // diagnose
  auto* dia = app.add_subcommand("diagnose", "proxy relevance and conditioning diagnostics");
  AnalysisConfig dia_analysis;
  std::string dia_config, dia_x, dia_z, dia_w;
  dia->add_option("--data", dia_analysis.input, "input CSV");
  dia->add_option("--config", dia_config, "analysis config JSON (overrides flags)");
  dia->add_option("--y", dia_analysis.roles.y, "outcome column");
  dia->add_option("--a", dia_analysis.roles.a, "treatment column");
  dia->add_option("--x", dia_x, "comma list of X columns");
  dia->add_option("--z", dia_z, "comma list of Z proxy columns");
  dia->add_option("--w", dia_w, "comma list of W proxy columns");
  dia->add_option("--out", dia_analysis.output, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_config, sim_n, sim_seed, sim_mode, sim_latent, sim_out,
                          sim_violation);
    }
    if (mc->parsed()) {
      return cmd_mc(mc_scenario, mc_reps, mc_n, mc_seed, mc_estimators, mc_workers, mc_format,
                    mc_out, mc_records, mc_drcov);
    }
    if (est->parsed()) {
      analysis.roles.x = split_list(est_x);
      analysis.roles.z = split_list(est_z);
      analysis.roles.w = split_list(est_w);
      analysis.h_interactions_with_a = split_list(est_hint);
      analysis.q_interactions_with_a = split_list(est_qint);
      analysis.estimators = split_list(est_estimators);
      if (!est_config.empty()) {
        analysis = analysis_config_from_json_text(slurp(est_config), analysis);
      }
      return cmd_estimate(analysis);
    }
    if (idd->parsed()) return cmd_identify(idd_law, idd_oracle, idd_out);
    if (dia->parsed()) {
      dia_analysis.roles.x = split_list(dia_x);
      dia_analysis.roles.z = split_list(dia_z);
      dia_analysis.roles.w = split_list(dia_w);
      if (!dia_config.empty()) {
        dia_analysis = analysis_config_from_json_text(slurp(dia_config), dia_analysis);
      }
      return cmd_diagnose(dia_analysis);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IdentificationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIdentification;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
