#pragma once

#include "stackcast/dataset.hpp"

#include <cstdint>
#include <optional>

namespace stackcast {

/// Decaying coefficient c*sqrt(2)*j^(-3/2) of the Gaussian design (j >= 1).
double coef_linear(int j, double c);

/// Alternating coefficient (-1)^(j+1)*sqrt(2)*j^(-3/2) of the binary design.
double coef_logistic(int j);

/// Unscaled coefficient vector of length q for the given family.
VectorXd base_coefficients(Family family, int q);

/// Scaling c such that Var[c X beta] / (Var[c X beta] + noise_var) = r2 when
/// the covariates are independent standard normals (Var[X beta] = |beta|^2).
double signal_scale(const VectorXd& beta, double noise_var, double r2);

/// Noise variance that enters the R^2 definition: sigma2 for Gaussian
/// outcomes, pi^2/3 (standard logistic latent error) for binary outcomes.
double latent_noise_variance(Family family, double sigma2);

struct DgpConfig {
  Family family = Family::linear;
  int n = 50;
  int q = 1000;     // generating dimension
  int p_fit = 14;   // leading columns handed to the candidates
  double r2 = 0.5;
  double sigma2 = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GeneratedData {
  Dataset train;
  std::optional<Dataset> test;
  double scale = 0.0;  // the c used for this draw
};

/// Draws a training set of config.n rows and, when test_size > 0, an
/// independent test set. Deterministic in (config, test_size).
GeneratedData generate(const DgpConfig& config, int test_size = 0);

}  // namespace stackcast
