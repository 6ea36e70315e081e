#include "proxci/discrete.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace proxci {

namespace {

Index flat_index(const std::array<Index, 6>& dims, Index u, Index x, Index w, Index z, Index a,
                 Index y) {
  return ((((u * dims[1] + x) * dims[2] + w) * dims[3] + z) * dims[4] + a) * dims[5] + y;
}

Index flat_index5(const std::array<Index, 5>& dims, Index x, Index w, Index z, Index a, Index y) {
  return (((x * dims[1] + w) * dims[2] + z) * dims[3] + a) * dims[4] + y;
}

void check_pmf(const Eigen::Ref<const VectorXd>& p, const char* what) {
  if ((p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-10) {
    throw ValidationError(std::string("component is not a probability vector: ") + what);
  }
}

double condition_number(const MatrixXd& m) {
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

}  // namespace

double& CategoricalLaw::at(Index u, Index x, Index w, Index z, Index a, Index y) {
  return prob[static_cast<std::size_t>(flat_index(dims, u, x, w, z, a, y))];
}
double CategoricalLaw::at(Index u, Index x, Index w, Index z, Index a, Index y) const {
  return prob[static_cast<std::size_t>(flat_index(dims, u, x, w, z, a, y))];
}

void CategoricalLaw::check() const {
  const Index total = dims[0] * dims[1] * dims[2] * dims[3] * dims[4] * dims[5];
  if (dims[4] != 2) throw ValidationError("treatment axis must have two categories");
  if (static_cast<Index>(prob.size()) != total) {
    throw ValidationError("probability array length does not match axis dimensions");
  }
  if (static_cast<Index>(y_values.size()) != dims[5]) {
    throw ValidationError("y_values length does not match the Y axis");
  }
  double sum = 0.0;
  for (double p : prob) {
    if (p < 0.0) throw ValidationError("negative probability entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ValidationError("probabilities sum to " + std::to_string(sum) + ", expected 1");
  }
}

double& ObservableLaw::at(Index x, Index w, Index z, Index a, Index y) {
  return prob[static_cast<std::size_t>(flat_index5(dims, x, w, z, a, y))];
}
double ObservableLaw::at(Index x, Index w, Index z, Index a, Index y) const {
  return prob[static_cast<std::size_t>(flat_index5(dims, x, w, z, a, y))];
}

VectorXd ObservableLaw::x_weights() const {
  VectorXd px = VectorXd::Zero(d_x());
  for (Index x = 0; x < d_x(); ++x) {
    for (Index w = 0; w < d_w(); ++w) {
      for (Index z = 0; z < d_z(); ++z) {
        for (Index a = 0; a < 2; ++a) {
          for (Index y = 0; y < d_y(); ++y) px(x) += at(x, w, z, a, y);
        }
      }
    }
  }
  return px;
}

ObservableLaw marginalize_u(const CategoricalLaw& law) {
  ObservableLaw obs;
  obs.dims = {law.d_x(), law.d_w(), law.d_z(), 2, law.d_y()};
  obs.prob.assign(static_cast<std::size_t>(law.d_x() * law.d_w() * law.d_z() * 2 * law.d_y()),
                  0.0);
  obs.y_values = law.y_values;
  for (Index u = 0; u < law.d_u(); ++u) {
    for (Index x = 0; x < law.d_x(); ++x) {
      for (Index w = 0; w < law.d_w(); ++w) {
        for (Index z = 0; z < law.d_z(); ++z) {
          for (Index a = 0; a < 2; ++a) {
            for (Index y = 0; y < law.d_y(); ++y) {
              obs.at(x, w, z, a, y) += law.at(u, x, w, z, a, y);
            }
          }
        }
      }
    }
  }
  return obs;
}

CategoricalLaw make_structured_law(const StructuredComponents& c) {
  const Index d_x = c.p_x.size();
  const Index d_u = c.p_u_given_x.rows();
  if (c.p_u_given_x.cols() != d_x || c.p_a1_given_ux.rows() != d_u ||
      c.p_a1_given_ux.cols() != d_x) {
    throw ValidationError("component shapes disagree on (d_u, d_x)");
  }
  if (static_cast<Index>(c.p_z_given_uax.size()) != 2 * d_x ||
      static_cast<Index>(c.p_w_given_ux.size()) != d_x ||
      static_cast<Index>(c.p_y_given_uax.size()) != 2 * d_x) {
    throw ValidationError("conditional component lists have the wrong length");
  }
  const Index d_z = c.p_z_given_uax.front().rows();
  const Index d_w = c.p_w_given_ux.front().rows();
  const Index d_y = c.p_y_given_uax.front().rows();

  check_pmf(c.p_x, "p_x");
  for (Index x = 0; x < d_x; ++x) {
    check_pmf(c.p_u_given_x.col(x), "p_u_given_x");
    for (Index u = 0; u < d_u; ++u) {
      const double pa = c.p_a1_given_ux(u, x);
      if (!(pa > 0.0) || !(pa < 1.0)) {
        throw ValidationError("Pr(A=1|u,x) must lie strictly in (0,1)");
      }
    }
    check_pmf(c.p_w_given_ux[static_cast<std::size_t>(x)].col(0), "p_w_given_ux");
    for (Index a = 0; a < 2; ++a) {
      const auto& pz = c.p_z_given_uax[static_cast<std::size_t>(a * d_x + x)];
      const auto& py = c.p_y_given_uax[static_cast<std::size_t>(a * d_x + x)];
      if (pz.rows() != d_z || pz.cols() != d_u || py.rows() != d_y || py.cols() != d_u) {
        throw ValidationError("conditional component has inconsistent shape");
      }
      for (Index u = 0; u < d_u; ++u) {
        check_pmf(pz.col(u), "p_z_given_uax");
        check_pmf(py.col(u), "p_y_given_uax");
      }
    }
    for (Index u = 0; u < d_u; ++u) {
      check_pmf(c.p_w_given_ux[static_cast<std::size_t>(x)].col(u), "p_w_given_ux");
    }
  }

  CategoricalLaw law;
  law.dims = {d_u, d_x, d_w, d_z, 2, d_y};
  law.prob.assign(static_cast<std::size_t>(d_u * d_x * d_w * d_z * 2 * d_y), 0.0);
  law.y_values = c.y_values;
  if (law.y_values.empty()) {
    law.y_values.resize(static_cast<std::size_t>(d_y));
    std::iota(law.y_values.begin(), law.y_values.end(), 0.0);
  }

  for (Index u = 0; u < d_u; ++u) {
    for (Index x = 0; x < d_x; ++x) {
      const double base = c.p_x(x) * c.p_u_given_x(u, x);
      for (Index a = 0; a < 2; ++a) {
        const double pa = a == 1 ? c.p_a1_given_ux(u, x) : 1.0 - c.p_a1_given_ux(u, x);
        const auto& pz = c.p_z_given_uax[static_cast<std::size_t>(a * d_x + x)];
        const auto& py = c.p_y_given_uax[static_cast<std::size_t>(a * d_x + x)];
        const auto& pw = c.p_w_given_ux[static_cast<std::size_t>(x)];
        for (Index w = 0; w < d_w; ++w) {
          for (Index z = 0; z < d_z; ++z) {
            for (Index y = 0; y < d_y; ++y) {
              law.at(u, x, w, z, a, y) = base * pa * pz(z, u) * pw(w, u) * py(y, u);
            }
          }
        }
      }
    }
  }
  law.check();
  return law;
}

MatrixXd identify_counterfactual(const ObservableLaw& law, Index a) {
  if (a != 0 && a != 1) throw ValidationError("a must be 0 or 1");
  const Index d = law.d_w();
  if (law.d_z() != d) {
    throw IdentificationError("matrix identification requires d_w == d_z");
  }
  MatrixXd result(law.d_x(), law.d_y());

  for (Index x = 0; x < law.d_x(); ++x) {
    double p_x = 0.0;
    VectorXd p_wx = VectorXd::Zero(d);   // Pr(w, x)
    VectorXd p_wax = VectorXd::Zero(d);  // Pr(w, a, x)
    MatrixXd p_zwax = MatrixXd::Zero(d, d);  // Pr(z, w, a, x), rows z, cols w
    MatrixXd p_yaz = MatrixXd::Zero(law.d_y(), d);  // Pr(y, a, z, x), cols z
    for (Index w = 0; w < d; ++w) {
      for (Index z = 0; z < d; ++z) {
        for (Index aa = 0; aa < 2; ++aa) {
          for (Index y = 0; y < law.d_y(); ++y) {
            const double p = law.at(x, w, z, aa, y);
            p_x += p;
            p_wx(w) += p;
            if (aa == a) {
              p_wax(w) += p;
              p_zwax(z, w) += p;
              p_yaz(y, z) += p;
            }
          }
        }
      }
    }
    if (!(p_x > 0.0)) throw IdentificationError("zero-probability X cell");

    VectorXd inv_pa_w(d);  // 1 / Pr(a | w, x)
    for (Index w = 0; w < d; ++w) {
      if (!(p_wx(w) > 0.0) || !(p_wax(w) > 0.0)) {
        throw IdentificationError("zero observable cell Pr(a, w | x); positivity fails");
      }
      inv_pa_w(w) = p_wx(w) / p_wax(w);
    }

    MatrixXd p_z_given_wax(d, d);  // rows z, cols w
    for (Index w = 0; w < d; ++w) p_z_given_wax.col(w) = p_zwax.col(w) / p_wax(w);

    const double cond = condition_number(p_z_given_wax);
    if (!(cond < 1e10)) {
      throw IdentificationError("completeness failure (rank): condition " + std::to_string(cond));
    }
    Eigen::PartialPivLU<MatrixXd> lu(p_z_given_wax);
    // row(w) = inv_pa_w' * P^{-1}: solve the transposed system
    const VectorXd lhs = lu.transpose().solve(inv_pa_w);

    double total = 0.0;
    for (Index y = 0; y < law.d_y(); ++y) {
      const double value = lhs.dot(p_yaz.row(y).transpose()) / p_x;
      if (value < -1e-8) {
        throw IdentificationError(
            "model incompatibility: negative identified probability " + std::to_string(value));
      }
      result(x, y) = value;
      total += value;
    }
    if (std::abs(total - 1.0) > 1e-8) {
      throw IdentificationError("model incompatibility: identified law sums to " +
                                std::to_string(total));
    }
  }
  return result;
}

MatrixXd oracle_counterfactual(const CategoricalLaw& law, Index a) {
  if (a != 0 && a != 1) throw ValidationError("a must be 0 or 1");
  MatrixXd result = MatrixXd::Zero(law.d_x(), law.d_y());
  for (Index x = 0; x < law.d_x(); ++x) {
    double p_x = 0.0;
    for (Index u = 0; u < law.d_u(); ++u) {
      double p_ux = 0.0;
      double p_uax = 0.0;
      VectorXd p_yuax = VectorXd::Zero(law.d_y());
      for (Index w = 0; w < law.d_w(); ++w) {
        for (Index z = 0; z < law.d_z(); ++z) {
          for (Index aa = 0; aa < 2; ++aa) {
            for (Index y = 0; y < law.d_y(); ++y) {
              const double p = law.at(u, x, w, z, aa, y);
              p_ux += p;
              if (aa == a) {
                p_uax += p;
                p_yuax(y) += p;
              }
            }
          }
        }
      }
      p_x += p_ux;
      if (!(p_uax > 0.0)) {
        throw IdentificationError("latent positivity fails: Pr(a | u, x) = 0");
      }
      result.row(x) += (p_ux * p_yuax / p_uax).transpose();
    }
    if (!(p_x > 0.0)) throw IdentificationError("zero-probability X cell");
    result.row(x) /= p_x;
  }
  return result;
}

double ate_from_law(const MatrixXd& cf0, const MatrixXd& cf1, const VectorXd& y_values,
                    const VectorXd& x_weights) {
  if (cf0.rows() != cf1.rows() || cf0.cols() != cf1.cols()) {
    throw ValidationError("counterfactual laws have mismatched shapes");
  }
  if (y_values.size() != cf0.cols() || x_weights.size() != cf0.rows()) {
    throw ValidationError("value or weight vector has the wrong length");
  }
  if (std::abs(x_weights.sum() - 1.0) > 1e-10) {
    throw ValidationError("x weights must sum to one");
  }
  return x_weights.dot((cf1 - cf0) * y_values);
}

CategoricalLaw random_structured_law(Index d, Index d_x, Index d_y, std::uint64_t seed,
                                     double condition_cap) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::uniform_real_distribution<double> unif(0.1, 0.9);

  auto random_pmf = [&](Index k) {
    VectorXd p(k);
    for (Index i = 0; i < k; ++i) p(i) = gamma(rng) + 0.05;  // keep cells off zero
    return (p / p.sum()).eval();
  };
  auto random_cond = [&](Index rows, Index cols) {
    MatrixXd m(rows, cols);
    for (Index j = 0; j < cols; ++j) m.col(j) = random_pmf(rows);
    return m;
  };

  for (int attempt = 0; attempt < 1000; ++attempt) {
    StructuredComponents c;
    c.p_x = random_pmf(d_x);
    c.p_u_given_x = random_cond(d, d_x);
    c.p_a1_given_ux.resize(d, d_x);
    for (Index u = 0; u < d; ++u) {
      for (Index x = 0; x < d_x; ++x) c.p_a1_given_ux(u, x) = unif(rng);
    }
    for (Index a = 0; a < 2; ++a) {
      for (Index x = 0; x < d_x; ++x) {
        c.p_z_given_uax.push_back(random_cond(d, d));
        c.p_y_given_uax.push_back(random_cond(d_y, d));
      }
    }
    for (Index x = 0; x < d_x; ++x) c.p_w_given_ux.push_back(random_cond(d, d));

    CategoricalLaw law = make_structured_law(c);
    const ObservableLaw obs = marginalize_u(law);
    bool well_posed = true;
    for (Index x = 0; x < d_x && well_posed; ++x) {
      for (Index a = 0; a < 2 && well_posed; ++a) {
        MatrixXd p_z_given_wax(d, d);
        for (Index w = 0; w < d; ++w) {
          VectorXd col = VectorXd::Zero(d);
          double mass = 0.0;
          for (Index z = 0; z < d; ++z) {
            for (Index y = 0; y < d_y; ++y) col(z) += obs.at(x, w, z, a, y);
          }
          mass = col.sum();
          if (!(mass > 0.0)) {
            well_posed = false;
            break;
          }
          p_z_given_wax.col(w) = col / mass;
        }
        if (well_posed && !(condition_number(p_z_given_wax) < condition_cap)) {
          well_posed = false;
        }
      }
    }
    if (well_posed) return law;
  }
  throw SolverError("could not sample a well-conditioned structured law");
}

}  // namespace proxci
