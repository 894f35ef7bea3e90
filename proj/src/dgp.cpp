#include "stackcast/dgp.hpp"

#include "stackcast/candidates.hpp"
#include "stackcast/error.hpp"
#include "stackcast/rng.hpp"

#include <cmath>
#include <numbers>

namespace stackcast {

double coef_linear(int j, double c) {
  require(j >= 1, "coefficient index must be >= 1");
  return c * std::numbers::sqrt2 * std::pow(static_cast<double>(j), -1.5);
}

double coef_logistic(int j) {
  require(j >= 1, "coefficient index must be >= 1");
  const double sign = (j % 2 == 1) ? 1.0 : -1.0;
  return sign * std::numbers::sqrt2 * std::pow(static_cast<double>(j), -1.5);
}

VectorXd base_coefficients(Family family, int q) {
  VectorXd beta(q);
  for (int j = 1; j <= q; ++j) {
    beta[j - 1] = family == Family::linear ? coef_linear(j, 1.0) : coef_logistic(j);
  }
  return beta;
}

double signal_scale(const VectorXd& beta, double noise_var, double r2) {
  require(noise_var > 0.0, "noise variance must be positive");
  require(r2 >= 0.0 && r2 < 1.0, "r2 must lie in [0, 1)");
  const double norm2 = beta.squaredNorm();
  if (!(norm2 > 0.0)) fail(ErrorCode::invalid_argument, "degenerate signal: coefficient vector has zero norm");
  return std::sqrt(r2 * noise_var / ((1.0 - r2) * norm2));
}

double latent_noise_variance(Family family, double sigma2) {
  return family == Family::linear ? sigma2 : std::numbers::pi * std::numbers::pi / 3.0;
}

void DgpConfig::validate() const {
  require(n >= 1, "n must be >= 1");
  require(q >= 1, "q must be >= 1");
  require(p_fit >= 1 && p_fit <= q, "p_fit must lie in [1, q]");
  require(r2 > 0.0 && r2 < 1.0, "r2 must lie strictly inside (0, 1)");
  require(sigma2 > 0.0, "sigma2 must be positive");
}

namespace {

Dataset draw(const DgpConfig& config, const VectorXd& scaled_beta, int rows, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  data.family = config.family;
  data.x.resize(rows, config.p_fit);
  VectorXd eta(rows);
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < config.q; ++j) {
      const double z = rng.normal();
      if (j < config.p_fit) data.x(i, j) = z;
      acc += z * scaled_beta[j];
    }
    eta[i] = acc;
  }

  data.y.resize(rows);
  if (config.family == Family::linear) {
    const double sd = std::sqrt(config.sigma2);
    for (int i = 0; i < rows; ++i) data.y[i] = eta[i] + sd * rng.normal();
    data.truth = eta;
  } else {
    VectorXd p(rows);
    for (int i = 0; i < rows; ++i) {
      p[i] = expit(eta[i]);
      data.y[i] = rng.bernoulli(p[i]) ? 1.0 : 0.0;
    }
    data.truth = std::move(p);
  }

  data.covariate_names.reserve(static_cast<std::size_t>(config.p_fit));
  for (int j = 1; j <= config.p_fit; ++j) data.covariate_names.push_back("x" + std::to_string(j));
  return data;
}

}  // namespace

GeneratedData generate(const DgpConfig& config, int test_size) {
  config.validate();
  require(test_size >= 0, "test size must be non-negative");
  const VectorXd beta = base_coefficients(config.family, config.q);
  GeneratedData out;
  out.scale = signal_scale(beta, latent_noise_variance(config.family, config.sigma2), config.r2);
  const VectorXd scaled = out.scale * beta;
  out.train = draw(config, scaled, config.n, derive_seed(config.seed, 0));
  if (test_size > 0) out.test = draw(config, scaled, test_size, derive_seed(config.seed, 1));
  return out;
}

}  // namespace stackcast
