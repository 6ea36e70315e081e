#pragma once

#include <Eigen/Dense>
#include <random>
#include <sstream>

#include "proxci/dataset.hpp"

namespace proxci::test {

// Small deterministic dataset with p_x = 2, p_z = p_w = 1.
inline ProxyDataset toy_dataset(Index n = 40, std::uint64_t seed = 9) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  ProxyDataset d;
  d.y.resize(n);
  d.a.resize(n);
  d.x.resize(n, 2);
  d.z.resize(n, 1);
  d.w.resize(n, 1);
  for (Index i = 0; i < n; ++i) {
    d.x(i, 0) = gauss(rng);
    d.x(i, 1) = gauss(rng);
    d.a(i) = i % 2 == 0 ? 1.0 : 0.0;  // exactly balanced
    d.z(i, 0) = gauss(rng) + 0.5 * d.a(i);
    d.w(i, 0) = gauss(rng) + 0.3 * d.z(i, 0);
    d.y(i) = 1.0 + 2.0 * d.a(i) + d.w(i, 0) + 0.25 * d.x(i, 0) + 0.1 * gauss(rng);
    (void)unif;
  }
  return d;
}

// Reference least squares through a different decomposition than the
// moment-system path.
inline VectorXd ols(const MatrixXd& design, const VectorXd& response) {
  return design.householderQr().solve(response);
}

inline std::string to_csv_text(const std::vector<std::string>& header,
                               const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << "\n";
  }
  return out.str();
}

}  // namespace proxci::test
