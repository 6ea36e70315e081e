#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "proxci/csv.hpp"
#include "proxci/errors.hpp"

namespace proxci {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Observations of (Y, A, X, Z, W): outcome, binary treatment, type-1
/// covariates, treatment-confounding proxies, outcome-confounding proxies.
/// Immutable after construction; the latent confounder column is retained
/// only by the simulator for oracle checks and never enters estimation.
struct ProxyDataset {
  VectorXd y;
  VectorXd a;
  MatrixXd x;
  MatrixXd z;
  MatrixXd w;
  VectorXd u_latent;  // size 0 unless produced by the simulator

  Index n() const { return y.size(); }
  Index px() const { return x.cols(); }
  Index pz() const { return z.cols(); }
  Index pw() const { return w.cols(); }
  bool has_latent() const { return u_latent.size() == n() && n() > 0; }

  Index n_treated() const { return static_cast<Index>(a.sum()); }

  /// Row subset in the given order (used by the bootstrap oracle).
  ProxyDataset subset(const std::vector<Index>& rows) const;

  /// Checks block shapes, binary treatment, and finiteness; throws
  /// ValidationError naming the offending column/row otherwise.
  void check() const;
};

/// Which raw column a model term reads from.
enum class Source { X, Z, W, A };

struct ColumnRef {
  Source src;
  int index = 0;  // ignored for Source::A

  bool operator==(const ColumnRef&) const = default;
};

/// Declarative model-term layout: [intercept | main terms | value*A terms].
/// The total term count is the coefficient dimension of any model built on it.
struct TermLayout {
  bool intercept = true;
  std::vector<ColumnRef> main_terms;
  std::vector<ColumnRef> interactions_with_a;

  Index dim() const {
    return (intercept ? 1 : 0) + static_cast<Index>(main_terms.size()) +
           static_cast<Index>(interactions_with_a.size());
  }
  /// Position of the A main term, or -1 when absent.
  Index a_position() const;
};

/// Validation context for build_design: which proxy family a layout may use.
enum class DesignBlock { OutcomeBridge, TreatmentBridge, Instrument };

/// Assembles an n-by-k design matrix. Column order is [intercept, main terms
/// in declared order, A-interactions in declared order]. When a_override is
/// set, every read of A (main term or interaction factor) uses that value
/// instead of the observed treatment.
MatrixXd build_design(const ProxyDataset& data, const TermLayout& layout, DesignBlock block,
                      std::optional<double> a_override = std::nullopt);

/// (1, W, A, X): regressors of the outcome confounding bridge.
TermLayout default_outcome_layout(const ProxyDataset& data);
/// (1, Z, A, X): instruments of the outcome bridge and regressors of the
/// treatment bridge.
TermLayout default_instrument_layout(const ProxyDataset& data);
/// (1, W, X) / (1, Z, X): control-group layouts for the treated-effect fits.
TermLayout att_outcome_layout(const ProxyDataset& data);
TermLayout att_instrument_layout(const ProxyDataset& data);

/// Swaps Z and W column references, preserving order and interactions,
/// producing the moment counterpart of a bridge layout (instrument for an
/// outcome layout, target for a treatment layout). Requires p_z == p_w
/// whenever the layout references a proxy column.
TermLayout mirror_layout(const TermLayout& layout, const ProxyDataset& data);

/// Declares which labeled columns play each role.
struct RoleMap {
  std::string y;
  std::string a;
  std::vector<std::string> x;
  std::vector<std::string> z;
  std::vector<std::string> w;
};

/// Parses and validates a labeled table into a ProxyDataset. The treatment
/// column must be {0,1}-valued; every referenced cell must be finite; role
/// assignments must be disjoint. Errors carry column name and row index.
ProxyDataset validate_dataset(const CsvTable& table, const RoleMap& roles);

/// Pairwise partial correlations between Z and W columns after residualizing
/// each on (1, X, A) by least squares, with two-sided t-test p-values on
/// n - p_x - 4 degrees of freedom. Pairs whose residual variance degenerates
/// are skipped (NaN entries) and reported in notes.
struct PartialCorrelationDiagnostic {
  MatrixXd r;        // p_z x p_w
  MatrixXd p_value;  // p_z x p_w
  std::vector<std::string> notes;
};
PartialCorrelationDiagnostic partial_correlation_diagnostic(const ProxyDataset& data);

}  // namespace proxci
