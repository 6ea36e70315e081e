#include "proxci/simulator.hpp"

#include <cmath>
#include <random>

namespace proxci {

SimConfig no_confounding_config() {
  SimConfig config;
  config.kappa_a = 0.0;
  config.mu_a = 0.0;
  return config;
}

SimConfig weak_zw_config() {
  SimConfig config;
  config.mu_a = 0.075;
  config.sigma(0, 1) = config.sigma(1, 0) = 0.15;  // sigma_zw
  config.sigma(1, 2) = config.sigma(2, 1) = 0.3;   // sigma_wu
  return config;
}

void validate_config(const SimConfig& config) {
  const Index px = config.px();
  if (config.alpha_x.size() != px || config.mu_x.size() != px || config.kappa_x.size() != px ||
      config.b_x.size() != px || config.t_x.size() != px) {
    throw ValidationError("X-coefficient vectors disagree on dimension");
  }
  if (config.n < 1) throw ValidationError("n must be positive");
  if (!(config.sigma_x > 0.0) || !(config.sigma_y >= 0.0)) {
    throw ValidationError("sigma_x must be positive and sigma_y nonnegative");
  }
  Eigen::LLT<Eigen::Matrix3d> llt(config.sigma);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("sigma is not symmetric positive definite");
  }
  const double szw = config.sigma(0, 1), szu = config.sigma(0, 2), swu = config.sigma(1, 2);
  const double su2 = config.sigma(2, 2);
  if (std::abs(szw * su2 - swu * szu) > 1e-10) {
    throw ValidationError("constraint violated: sigma_zw sigma_u^2 != sigma_wu sigma_zu");
  }
  if (std::abs(config.mu_a * su2 - swu * config.kappa_a) > 1e-10) {
    throw ValidationError("constraint violated: mu_a sigma_u^2 != sigma_wu kappa_a");
  }
}

DerivedParams derive_params(const SimConfig& config, double t_0, const VectorXd& t_x) {
  validate_config(config);
  const double sz2 = config.sigma(0, 0), szu = config.sigma(0, 2), swu = config.sigma(1, 2);
  const double sw2 = config.sigma(1, 1), su2 = config.sigma(2, 2);
  if (!(su2 > 0.0)) throw ValidationError("sigma_u^2 must be positive");

  DerivedParams d;
  d.theta_u = szu / su2;
  if (d.theta_u == 0.0) {
    throw ValidationError("theta_u = 0: Z carries no confounder signal, bridge truth undefined");
  }
  d.theta_0 = config.alpha_0 - d.theta_u * config.kappa_0;
  d.theta_a = config.alpha_a - d.theta_u * config.kappa_a;
  d.theta_x = config.alpha_x - d.theta_u * config.kappa_x;
  d.var_z_given_uax = sz2 * (1.0 - szu * szu / (sz2 * su2));
  d.var_u_given_wax = su2 * (1.0 - swu * swu / (su2 * sw2));
  d.t_z = -(config.kappa_a - swu * config.mu_a / sw2) / (d.theta_u * d.var_u_given_wax);
  d.t_a = -d.t_z * d.t_z * d.var_z_given_uax - d.t_z * d.theta_a;
  d.t_0 = t_0;
  d.t_x = t_x;
  d.psi_true = config.b_a;
  return d;
}

namespace {

double consistent_propensity(const SimConfig& config, const DerivedParams& d,
                             const Eigen::Ref<const VectorXd>& x) {
  // 1/Pr(A=1|X) = 1 + exp{g(X)} with g assembled from the bridge truth.
  const double tzu = d.t_z * d.theta_u;
  double g = d.t_0 + d.t_a + d.t_x.dot(x);
  g += d.t_z * (d.theta_0 + d.theta_a + d.theta_x.dot(x));
  g += 0.5 * d.t_z * d.t_z * d.var_z_given_uax;
  g += tzu * (config.kappa_0 + config.kappa_a + config.kappa_x.dot(x));
  g += 0.5 * config.sigma(2, 2) * tzu * tzu;
  return 1.0 / (1.0 + std::exp(g));
}

double plain_logistic_propensity(const Eigen::Ref<const VectorXd>& x) {
  return 1.0 / (1.0 + std::exp(0.125 * x.sum()));
}

}  // namespace

ProxyDataset simulate(const SimConfig& config) {
  validate_config(config);
  const DerivedParams d = derive_params(config, config.t_0, config.t_x);
  const Index n = config.n;
  const Index px = config.px();

  const Eigen::Matrix3d chol = config.sigma.llt().matrixL();
  const double w_slope = config.sigma(1, 2) / config.sigma(2, 2);  // sigma_wu / sigma_u^2

  std::mt19937_64 rng(splitmix64(config.seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  ProxyDataset data;
  data.y.resize(n);
  data.a.resize(n);
  data.x.resize(n, px);
  data.z.resize(n, 1);
  data.w.resize(n, 1);
  data.u_latent.resize(n);

  VectorXd x(px);
  Eigen::Vector3d noise;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < px; ++j) x(j) = config.gamma_x(j) + config.sigma_x * gauss(rng);
    data.x.row(i) = x.transpose();

    const double p1 = config.propensity_mode == PropensityMode::AppendixConsistent
                          ? consistent_propensity(config, d, x)
                          : plain_logistic_propensity(x);
    const double a = unif(rng) < p1 ? 1.0 : 0.0;
    data.a(i) = a;

    noise << gauss(rng), gauss(rng), gauss(rng);
    const Eigen::Vector3d zwu =
        Eigen::Vector3d(config.alpha_0 + config.alpha_a * a + config.alpha_x.dot(x),
                        config.mu_0 + config.mu_a * a + config.mu_x.dot(x),
                        config.kappa_0 + config.kappa_a * a + config.kappa_x.dot(x)) +
        chol * noise;
    data.z(i, 0) = zwu(0);
    data.w(i, 0) = zwu(1);
    data.u_latent(i) = zwu(2);

    const double w_mean_given_u =
        config.mu_0 + config.mu_x.dot(x) + w_slope * (zwu(2) - config.kappa_0 - config.kappa_x.dot(x));
    data.y(i) = config.b_0 + config.b_a * a + config.b_x.dot(x) +
                (config.b_w - config.omega) * w_mean_given_u + config.omega * zwu(1) +
                config.sigma_y * gauss(rng);
  }
  return data;
}

Misspec parse_misspec(const std::string& name) {
  if (name == "none") return Misspec::None;
  if (name == "w_star3") return Misspec::WStar3;
  if (name == "z_star3") return Misspec::ZStar3;
  if (name == "both_star1") return Misspec::BothStar1;
  throw ValidationError("unknown misspecification: " + name);
}

ProxyDataset misspecify(const ProxyDataset& data, Misspec which) {
  ProxyDataset out = data;
  auto transform = [](MatrixXd& block, double shift) {
    block = block.array().abs().sqrt() + shift;
  };
  switch (which) {
    case Misspec::None:
      break;
    case Misspec::WStar3:
      transform(out.w, 3.0);
      break;
    case Misspec::ZStar3:
      transform(out.z, 3.0);
      break;
    case Misspec::BothStar1:
      transform(out.w, 1.0);
      transform(out.z, 1.0);
      break;
  }
  return out;
}

ProxyDataset simulate_violation(const ViolationConfig& config) {
  if (config.n < 1) throw ValidationError("n must be positive");
  const Index n = config.n;
  std::mt19937_64 rng(splitmix64(config.seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  ProxyDataset data;
  data.y.resize(n);
  data.a.resize(n);
  data.x.resize(n, 1);
  data.z.resize(n, 1);
  data.w.resize(n, 1);
  data.u_latent.resize(n);

  for (Index i = 0; i < n; ++i) {
    const double g1 = gauss(rng);
    const double g2 = gauss(rng);
    const double x = g1;
    const double u = 0.5 * g1 + std::sqrt(0.75) * g2;  // corr(X, U) = 0.5
    const double z = 0.5 + 0.5 * x + u + gauss(rng);
    const double logit = -0.5 + z + 0.5 * x + 0.3 * u;
    const double a = unif(rng) < 1.0 / (1.0 + std::exp(-logit)) ? 1.0 : 0.0;
    const double eps2 = gauss(rng);
    const double w = 1.0 - x + 0.4 * u + 1.5 * z + eps2;
    data.y(i) = 1.0 + 0.5 * a + 2.0 * x + u + 1.5 * a * u + 2.0 * eps2;
    data.a(i) = a;
    data.x(i, 0) = x;
    data.z(i, 0) = z;
    data.w(i, 0) = w;
    data.u_latent(i) = u;
  }
  return data;
}

std::uint64_t splitmix64(std::uint64_t state) {
  std::uint64_t z = state + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t replication) {
  return splitmix64(base_seed ^ splitmix64(replication));
}

}  // namespace proxci
