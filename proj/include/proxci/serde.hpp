#pragma once

#include <string>

#include "proxci/bridges.hpp"
#include "proxci/discrete.hpp"
#include "proxci/estimators.hpp"
#include "proxci/harness.hpp"
#include "proxci/simulator.hpp"

namespace proxci {

/// SimConfig <-> JSON with field names mirroring the struct; absent keys keep
/// their defaults.
SimConfig sim_config_from_json_text(const std::string& text);
std::string sim_config_to_json_text(const SimConfig& config);

/// Categorical law file: {"axes": {...}, "y_values": [...], "probabilities":
/// [...]} with probabilities flat in row-major (u, x, w, z, a, y) order; the
/// "u" axis may be omitted for an observable law.
struct LawFile {
  bool has_latent = false;
  CategoricalLaw latent;   // valid when has_latent
  ObservableLaw observable;  // always valid
};
LawFile law_from_json_text(const std::string& text);
std::string law_to_json_text(const CategoricalLaw& law);

std::string report_to_json_text(const EstimateReport& report);
std::string reports_to_json_text(const std::vector<EstimateReport>& reports, Index n);

std::string outcome_fit_to_json_text(const OutcomeBridgeFit& fit);
std::string treatment_fit_to_json_text(const TreatmentBridgeFit& fit);

/// Analysis settings for the estimate/diagnose commands. Column names are
/// resolved against the table header; interaction lists name columns already
/// assigned to Z/W/X roles.
struct AnalysisConfig {
  std::string input;
  RoleMap roles;
  std::vector<std::string> h_interactions_with_a;
  std::vector<std::string> q_interactions_with_a;
  std::vector<std::string> estimators;  // empty: all applicable
  std::string target = "ate";           // "ate" | "att"
  std::string dr_covariates = "xzw";    // "xzw" | "x"
  std::string output;
};

/// Merges JSON config over `base`: keys present in the file replace the
/// corresponding fields.
AnalysisConfig analysis_config_from_json_text(const std::string& text, AnalysisConfig base);

/// Dataset CSV: header Y,A,X1..,Z1..,W1.. with U appended when requested.
void write_dataset_csv(std::ostream& out, const ProxyDataset& data, bool with_latent);

}  // namespace proxci
