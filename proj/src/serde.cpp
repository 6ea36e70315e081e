#include "proxci/serde.hpp"

#include <json.hpp>
#include <ostream>

#include "proxci/csv.hpp"

namespace proxci {

using nlohmann::json;

namespace {

json parse(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ValidationError("malformed JSON");
  return j;
}

VectorXd vector_from(const json& j, const char* key) {
  VectorXd v(j.at(key).size());
  Index i = 0;
  for (const auto& e : j.at(key)) v(i++) = e.get<double>();
  return v;
}

json vector_to(const VectorXd& v) {
  json j = json::array();
  for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

std::string ref_to_string(const ColumnRef& ref) {
  switch (ref.src) {
    case Source::A:
      return "A";
    case Source::X:
      return "X" + std::to_string(ref.index);
    case Source::Z:
      return "Z" + std::to_string(ref.index);
    default:
      return "W" + std::to_string(ref.index);
  }
}

json layout_to_json(const TermLayout& layout) {
  json j;
  j["intercept"] = layout.intercept;
  j["main"] = json::array();
  for (const auto& ref : layout.main_terms) j["main"].push_back(ref_to_string(ref));
  j["interactions_with_a"] = json::array();
  for (const auto& ref : layout.interactions_with_a) {
    j["interactions_with_a"].push_back(ref_to_string(ref));
  }
  return j;
}

json report_to_json(const EstimateReport& report) {
  json j;
  j["estimator"] = estimator_name(report.estimator);
  j["estimate"] = report.estimate;
  j["std_err"] = report.std_err;
  j["ci_low"] = report.ci_low;
  j["ci_high"] = report.ci_high;
  j["n"] = report.n;
  j["solver_meta"] = json::object();
  for (const auto& [key, value] : report.solver_meta) j["solver_meta"][key] = value;
  return j;
}

}  // namespace

SimConfig sim_config_from_json_text(const std::string& text) {
  const json j = parse(text);
  SimConfig config;
  if (j.contains("gamma_x")) config.gamma_x = vector_from(j, "gamma_x");
  const Index px = config.px();
  auto def = [&](const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
  };
  auto defv = [&](const char* key, VectorXd fallback) {
    if (!j.contains(key)) {
      if (fallback.size() != px) fallback = VectorXd::Constant(px, fallback.size() ? fallback(0) : 0.25);
      return fallback;
    }
    return vector_from(j, key);
  };
  config.sigma_x = def("sigma_x", config.sigma_x);
  config.alpha_0 = def("alpha_0", config.alpha_0);
  config.alpha_a = def("alpha_a", config.alpha_a);
  config.alpha_x = defv("alpha_x", config.alpha_x);
  config.mu_0 = def("mu_0", config.mu_0);
  config.mu_a = def("mu_a", config.mu_a);
  config.mu_x = defv("mu_x", config.mu_x);
  config.kappa_0 = def("kappa_0", config.kappa_0);
  config.kappa_a = def("kappa_a", config.kappa_a);
  config.kappa_x = defv("kappa_x", config.kappa_x);
  if (j.contains("sigma")) {
    const auto& rows = j.at("sigma");
    if (rows.size() != 3) throw ValidationError("sigma must be a 3x3 matrix");
    for (Index r = 0; r < 3; ++r) {
      if (rows[static_cast<std::size_t>(r)].size() != 3) {
        throw ValidationError("sigma must be a 3x3 matrix");
      }
      for (Index c = 0; c < 3; ++c) {
        config.sigma(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]
                                 .get<double>();
      }
    }
  }
  config.b_0 = def("b_0", config.b_0);
  config.b_a = def("b_a", config.b_a);
  config.b_x = defv("b_x", config.b_x);
  config.b_w = def("b_w", config.b_w);
  config.omega = def("omega", config.omega);
  config.sigma_y = def("sigma_y", config.sigma_y);
  config.t_0 = def("t_0", config.t_0);
  config.t_x = defv("t_x", config.t_x);
  if (j.contains("propensity_mode")) {
    const std::string mode = j.at("propensity_mode").get<std::string>();
    if (mode == "appendix_h_consistent") {
      config.propensity_mode = PropensityMode::AppendixConsistent;
    } else if (mode == "section51_logistic") {
      config.propensity_mode = PropensityMode::PlainLogistic;
    } else {
      throw ValidationError("unknown propensity_mode: " + mode);
    }
  }
  if (j.contains("n")) config.n = j.at("n").get<Index>();
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  validate_config(config);
  return config;
}

std::string sim_config_to_json_text(const SimConfig& config) {
  json j;
  j["gamma_x"] = vector_to(config.gamma_x);
  j["sigma_x"] = config.sigma_x;
  j["alpha_0"] = config.alpha_0;
  j["alpha_a"] = config.alpha_a;
  j["alpha_x"] = vector_to(config.alpha_x);
  j["mu_0"] = config.mu_0;
  j["mu_a"] = config.mu_a;
  j["mu_x"] = vector_to(config.mu_x);
  j["kappa_0"] = config.kappa_0;
  j["kappa_a"] = config.kappa_a;
  j["kappa_x"] = vector_to(config.kappa_x);
  j["sigma"] = json::array();
  for (Index r = 0; r < 3; ++r) {
    json row = json::array();
    for (Index c = 0; c < 3; ++c) row.push_back(config.sigma(r, c));
    j["sigma"].push_back(row);
  }
  j["b_0"] = config.b_0;
  j["b_a"] = config.b_a;
  j["b_x"] = vector_to(config.b_x);
  j["b_w"] = config.b_w;
  j["omega"] = config.omega;
  j["sigma_y"] = config.sigma_y;
  j["t_0"] = config.t_0;
  j["t_x"] = vector_to(config.t_x);
  j["propensity_mode"] = config.propensity_mode == PropensityMode::AppendixConsistent
                             ? "appendix_h_consistent"
                             : "section51_logistic";
  j["n"] = config.n;
  j["seed"] = config.seed;
  return j.dump(2);
}

LawFile law_from_json_text(const std::string& text) {
  const json j = parse(text);
  if (!j.contains("axes") || !j.contains("probabilities")) {
    throw ValidationError("law file needs \"axes\" and \"probabilities\"");
  }
  const auto& axes = j.at("axes");
  auto axis_size = [&](const char* key) -> Index {
    if (!axes.contains(key)) throw ValidationError(std::string("missing axis: ") + key);
    return static_cast<Index>(axes.at(key).size());
  };
  const bool has_u = axes.contains("u");
  const Index d_u = has_u ? static_cast<Index>(axes.at("u").size()) : 1;
  const Index d_x = axis_size("x");
  const Index d_w = axis_size("w");
  const Index d_z = axis_size("z");
  const Index d_a = axis_size("a");
  const Index d_y = axis_size("y");
  if (d_a != 2) throw ValidationError("treatment axis must have two categories");

  std::vector<double> y_values;
  if (j.contains("y_values")) {
    for (const auto& v : j.at("y_values")) y_values.push_back(v.get<double>());
    if (static_cast<Index>(y_values.size()) != d_y) {
      throw ValidationError("y_values length does not match the y axis");
    }
  } else {
    for (Index y = 0; y < d_y; ++y) y_values.push_back(static_cast<double>(y));
  }

  std::vector<double> prob;
  for (const auto& v : j.at("probabilities")) prob.push_back(v.get<double>());

  LawFile file;
  file.has_latent = has_u;
  CategoricalLaw law;
  law.dims = {d_u, d_x, d_w, d_z, 2, d_y};
  law.prob = std::move(prob);
  law.y_values = y_values;
  law.check();
  file.observable = marginalize_u(law);
  if (has_u) file.latent = std::move(law);
  return file;
}

std::string law_to_json_text(const CategoricalLaw& law) {
  law.check();
  json j;
  auto labels = [](const char* prefix, Index d) {
    json arr = json::array();
    for (Index i = 0; i < d; ++i) arr.push_back(std::string(prefix) + std::to_string(i));
    return arr;
  };
  j["axes"]["u"] = labels("u", law.d_u());
  j["axes"]["x"] = labels("x", law.d_x());
  j["axes"]["w"] = labels("w", law.d_w());
  j["axes"]["z"] = labels("z", law.d_z());
  j["axes"]["a"] = labels("a", 2);
  j["axes"]["y"] = labels("y", law.d_y());
  j["y_values"] = law.y_values;
  j["probabilities"] = law.prob;
  return j.dump();
}

std::string report_to_json_text(const EstimateReport& report) {
  return report_to_json(report).dump(2);
}

std::string reports_to_json_text(const std::vector<EstimateReport>& reports, Index n) {
  json j;
  j["n"] = n;
  j["reports"] = json::array();
  for (const auto& report : reports) j["reports"].push_back(report_to_json(report));
  return j.dump(2);
}

std::string outcome_fit_to_json_text(const OutcomeBridgeFit& fit) {
  json j;
  j["layout"] = layout_to_json(fit.layout);
  j["instrument_layout"] = layout_to_json(fit.instrument_layout);
  j["coefficients"] = vector_to(fit.coef);
  j["solver_meta"] = {{"gram_condition", fit.gram_condition},
                      {"residual_moment_norm", fit.residual_moment_norm}};
  return j.dump(2);
}

std::string treatment_fit_to_json_text(const TreatmentBridgeFit& fit) {
  json j;
  j["layout"] = layout_to_json(fit.layout);
  j["target_layout"] = layout_to_json(fit.target_layout);
  j["coefficients"] = vector_to(fit.coef);
  j["solver_meta"] = {{"iterations", fit.iterations},
                      {"final_residual_norm", fit.final_residual_norm},
                      {"converged", fit.converged ? 1.0 : 0.0}};
  return j.dump(2);
}

AnalysisConfig analysis_config_from_json_text(const std::string& text, AnalysisConfig base) {
  const json j = parse(text);
  auto strings_from = [&](const char* key) {
    std::vector<std::string> out;
    for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
    return out;
  };
  if (j.contains("input")) base.input = j.at("input").get<std::string>();
  if (j.contains("roles")) {
    const auto& roles = j.at("roles");
    if (roles.contains("y")) base.roles.y = roles.at("y").get<std::string>();
    if (roles.contains("a")) base.roles.a = roles.at("a").get<std::string>();
    auto role_list = [&](const char* key, std::vector<std::string>& slot) {
      if (!roles.contains(key)) return;
      slot.clear();
      for (const auto& v : roles.at(key)) slot.push_back(v.get<std::string>());
    };
    role_list("x", base.roles.x);
    role_list("z", base.roles.z);
    role_list("w", base.roles.w);
  }
  if (j.contains("h_interactions_with_a")) {
    base.h_interactions_with_a = strings_from("h_interactions_with_a");
  }
  if (j.contains("q_interactions_with_a")) {
    base.q_interactions_with_a = strings_from("q_interactions_with_a");
  }
  if (j.contains("estimators")) base.estimators = strings_from("estimators");
  if (j.contains("target")) base.target = j.at("target").get<std::string>();
  if (j.contains("dr_covariates")) base.dr_covariates = j.at("dr_covariates").get<std::string>();
  if (j.contains("output")) base.output = j.at("output").get<std::string>();
  return base;
}

void write_dataset_csv(std::ostream& out, const ProxyDataset& data, bool with_latent) {
  std::vector<std::string> header = {"Y", "A"};
  for (Index j = 0; j < data.px(); ++j) header.push_back("X" + std::to_string(j + 1));
  for (Index j = 0; j < data.pz(); ++j) header.push_back("Z" + std::to_string(j + 1));
  for (Index j = 0; j < data.pw(); ++j) header.push_back("W" + std::to_string(j + 1));
  if (with_latent) {
    if (!data.has_latent()) throw ValidationError("dataset has no latent column to export");
    header.push_back("U");
  }
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(data.n()));
  for (Index i = 0; i < data.n(); ++i) {
    auto& row = rows[static_cast<std::size_t>(i)];
    row.reserve(header.size());
    row.push_back(data.y(i));
    row.push_back(data.a(i));
    for (Index j = 0; j < data.px(); ++j) row.push_back(data.x(i, j));
    for (Index j = 0; j < data.pz(); ++j) row.push_back(data.z(i, j));
    for (Index j = 0; j < data.pw(); ++j) row.push_back(data.w(i, j));
    if (with_latent) row.push_back(data.u_latent(i));
  }
  write_csv(out, header, rows);
}

}  // namespace proxci
