#include "proxci/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "proxci/stats.hpp"

namespace proxci {

ProxyDataset ProxyDataset::subset(const std::vector<Index>& rows) const {
  ProxyDataset out;
  const Index m = static_cast<Index>(rows.size());
  out.y.resize(m);
  out.a.resize(m);
  out.x.resize(m, x.cols());
  out.z.resize(m, z.cols());
  out.w.resize(m, w.cols());
  if (has_latent()) out.u_latent.resize(m);
  for (Index i = 0; i < m; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    out.y(i) = y(r);
    out.a(i) = a(r);
    out.x.row(i) = x.row(r);
    out.z.row(i) = z.row(r);
    out.w.row(i) = w.row(r);
    if (has_latent()) out.u_latent(i) = u_latent(r);
  }
  return out;
}

void ProxyDataset::check() const {
  const Index m = n();
  if (m < 1) throw ValidationError("dataset has no rows");
  if (a.size() != m || x.rows() != m || z.rows() != m || w.rows() != m) {
    throw ValidationError("dataset blocks disagree on the number of rows");
  }
  auto check_finite = [m](const MatrixXd& block, const char* name) {
    for (Index j = 0; j < block.cols(); ++j) {
      for (Index i = 0; i < m; ++i) {
        if (!std::isfinite(block(i, j))) {
          throw ValidationError(std::string("non-finite value in ") + name + " column " +
                                std::to_string(j) + ", row " + std::to_string(i));
        }
      }
    }
  };
  check_finite(y, "Y");
  check_finite(x, "X");
  check_finite(z, "Z");
  check_finite(w, "W");
  for (Index i = 0; i < m; ++i) {
    if (a(i) != 0.0 && a(i) != 1.0) {
      throw ValidationError("non-binary treatment at row " + std::to_string(i));
    }
  }
}

Index TermLayout::a_position() const {
  Index pos = intercept ? 1 : 0;
  for (const auto& ref : main_terms) {
    if (ref.src == Source::A) return pos;
    ++pos;
  }
  return -1;
}

namespace {

const MatrixXd& block_for(const ProxyDataset& data, Source src) {
  switch (src) {
    case Source::X:
      return data.x;
    case Source::Z:
      return data.z;
    case Source::W:
      return data.w;
    default:
      throw ValidationError("A is not a matrix block");
  }
}

void check_ref(const ProxyDataset& data, const ColumnRef& ref, DesignBlock block) {
  if (ref.src == Source::A) return;
  if (ref.src == Source::Z && block == DesignBlock::OutcomeBridge) {
    throw ValidationError("Z column referenced in an outcome-bridge layout");
  }
  if (ref.src == Source::W &&
      (block == DesignBlock::TreatmentBridge || block == DesignBlock::Instrument)) {
    throw ValidationError("W column referenced in a treatment-side layout");
  }
  const MatrixXd& b = block_for(data, ref.src);
  if (ref.index < 0 || ref.index >= b.cols()) {
    throw ValidationError("column reference out of range: index " + std::to_string(ref.index));
  }
}

double term_value(const ProxyDataset& data, const ColumnRef& ref, Index i, double a_value) {
  if (ref.src == Source::A) return a_value;
  return block_for(data, ref.src)(i, ref.index);
}

}  // namespace

MatrixXd build_design(const ProxyDataset& data, const TermLayout& layout, DesignBlock block,
                      std::optional<double> a_override) {
  for (const auto& ref : layout.main_terms) check_ref(data, ref, block);
  for (const auto& ref : layout.interactions_with_a) {
    if (ref.src == Source::A) {
      throw ValidationError("A cannot interact with itself in a layout");
    }
    check_ref(data, ref, block);
  }

  const Index m = data.n();
  MatrixXd design(m, layout.dim());
  for (Index i = 0; i < m; ++i) {
    const double ai = a_override.value_or(data.a(i));
    Index c = 0;
    if (layout.intercept) design(i, c++) = 1.0;
    for (const auto& ref : layout.main_terms) {
      design(i, c++) = term_value(data, ref, i, ai);
    }
    for (const auto& ref : layout.interactions_with_a) {
      design(i, c++) = term_value(data, ref, i, ai) * ai;
    }
  }
  return design;
}

namespace {

TermLayout proxy_a_x_layout(Source proxy, Index p_proxy, Index p_x, bool with_a) {
  TermLayout layout;
  for (Index j = 0; j < p_proxy; ++j) layout.main_terms.push_back({proxy, static_cast<int>(j)});
  if (with_a) layout.main_terms.push_back({Source::A, 0});
  for (Index j = 0; j < p_x; ++j) layout.main_terms.push_back({Source::X, static_cast<int>(j)});
  return layout;
}

}  // namespace

TermLayout default_outcome_layout(const ProxyDataset& data) {
  return proxy_a_x_layout(Source::W, data.pw(), data.px(), true);
}

TermLayout default_instrument_layout(const ProxyDataset& data) {
  return proxy_a_x_layout(Source::Z, data.pz(), data.px(), true);
}

TermLayout att_outcome_layout(const ProxyDataset& data) {
  return proxy_a_x_layout(Source::W, data.pw(), data.px(), false);
}

TermLayout att_instrument_layout(const ProxyDataset& data) {
  return proxy_a_x_layout(Source::Z, data.pz(), data.px(), false);
}

TermLayout mirror_layout(const TermLayout& layout, const ProxyDataset& data) {
  auto swap_ref = [&](ColumnRef ref) {
    if (ref.src == Source::Z || ref.src == Source::W) {
      if (data.pz() != data.pw()) {
        throw ValidationError(
            "cannot mirror a layout between proxy blocks of unequal dimension; "
            "supply the counterpart layout explicitly");
      }
      ref.src = ref.src == Source::Z ? Source::W : Source::Z;
    }
    return ref;
  };
  TermLayout out;
  out.intercept = layout.intercept;
  for (const auto& ref : layout.main_terms) out.main_terms.push_back(swap_ref(ref));
  for (const auto& ref : layout.interactions_with_a) {
    out.interactions_with_a.push_back(swap_ref(ref));
  }
  return out;
}

ProxyDataset validate_dataset(const CsvTable& table, const RoleMap& roles) {
  if (roles.y.empty() || roles.a.empty()) {
    throw ValidationError("roles must name an outcome column and a treatment column");
  }
  std::set<std::string> seen;
  auto claim = [&seen](const std::string& name) {
    if (!seen.insert(name).second) {
      throw ValidationError("column \"" + name + "\" assigned to more than one role");
    }
  };
  claim(roles.y);
  claim(roles.a);
  for (const auto& c : roles.x) claim(c);
  for (const auto& c : roles.z) claim(c);
  for (const auto& c : roles.w) claim(c);

  const std::size_t m = table.n_rows();
  if (m == 0) throw ValidationError("table has no data rows");

  auto read_column = [&](const std::string& name) {
    const std::size_t j = table.column(name);
    VectorXd v(static_cast<Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
      const double value = parse_cell(table.rows[i][j], name, i);
      if (!std::isfinite(value)) {
        throw ValidationError("column \"" + name + "\", row " + std::to_string(i) +
                              ": non-finite value");
      }
      v(static_cast<Index>(i)) = value;
    }
    return v;
  };
  auto read_block = [&](const std::vector<std::string>& names) {
    MatrixXd block(static_cast<Index>(m), static_cast<Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
      block.col(static_cast<Index>(j)) = read_column(names[j]);
    }
    return block;
  };

  ProxyDataset data;
  data.y = read_column(roles.y);
  data.a = read_column(roles.a);
  data.x = read_block(roles.x);
  data.z = read_block(roles.z);
  data.w = read_block(roles.w);
  for (Index i = 0; i < data.a.size(); ++i) {
    if (data.a(i) != 0.0 && data.a(i) != 1.0) {
      throw ValidationError("non-binary treatment: column \"" + roles.a + "\", row " +
                            std::to_string(i) + " holds " + std::to_string(data.a(i)));
    }
  }
  data.check();
  return data;
}

PartialCorrelationDiagnostic partial_correlation_diagnostic(const ProxyDataset& data) {
  const Index m = data.n();
  const Index px = data.px();
  if (m <= px + 4) {
    throw ValidationError("partial correlation needs n > p_x + 4");
  }

  MatrixXd controls(m, px + 2);
  controls.col(0).setOnes();
  controls.middleCols(1, px) = data.x;
  controls.col(px + 1) = data.a;

  Eigen::ColPivHouseholderQR<MatrixXd> qr(controls);
  PartialCorrelationDiagnostic diag;
  diag.r = MatrixXd::Constant(data.pz(), data.pw(), std::numeric_limits<double>::quiet_NaN());
  diag.p_value = diag.r;
  if (qr.rank() < controls.cols()) {
    diag.notes.push_back("(1, X, A) design is rank-deficient; all pairs skipped");
    return diag;
  }

  auto residualize = [&](const VectorXd& v) { return (v - controls * qr.solve(v)).eval(); };

  std::vector<VectorXd> rz(static_cast<std::size_t>(data.pz()));
  std::vector<VectorXd> rw(static_cast<std::size_t>(data.pw()));
  for (Index j = 0; j < data.pz(); ++j) rz[static_cast<std::size_t>(j)] = residualize(data.z.col(j));
  for (Index k = 0; k < data.pw(); ++k) rw[static_cast<std::size_t>(k)] = residualize(data.w.col(k));

  const double df = static_cast<double>(m - px - 4);
  for (Index j = 0; j < data.pz(); ++j) {
    for (Index k = 0; k < data.pw(); ++k) {
      const VectorXd& u = rz[static_cast<std::size_t>(j)];
      const VectorXd& v = rw[static_cast<std::size_t>(k)];
      const double su = u.norm();
      const double sv = v.norm();
      if (su <= 1e-12 * std::sqrt(static_cast<double>(m)) ||
          sv <= 1e-12 * std::sqrt(static_cast<double>(m))) {
        diag.notes.push_back("degenerate residual for pair (Z" + std::to_string(j) + ", W" +
                             std::to_string(k) + "); skipped");
        continue;
      }
      double r = u.dot(v) / (su * sv);
      r = std::clamp(r, -1.0, 1.0);
      diag.r(j, k) = r;
      if (std::abs(r) >= 1.0) {
        diag.p_value(j, k) = 0.0;
      } else {
        const double t = r * std::sqrt(df / (1.0 - r * r));
        diag.p_value(j, k) = student_t_two_sided_p(t, df);
      }
    }
  }
  return diag;
}

}  // namespace proxci
