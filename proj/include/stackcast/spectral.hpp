#pragma once

#include "stackcast/candidates.hpp"

#include <cstdint>
#include <span>

namespace stackcast {

struct EigenRange {
  double min = 0.0;
  double max = 0.0;
};

/// Extreme eigenvalues of a symmetric matrix (dense symmetric eigensolver).
/// Results agree across backends to about 1e-9 for the sizes used here.
EigenRange extreme_eigs(const MatrixXd& m);

/// Largest design size verify_lemma1 will materialize.
inline constexpr Index kMaxSpectralRows = 2000;

/// Dense hat matrix X (X'X + sigma2 S^-1)^-1 X' of a normal-prior candidate.
MatrixXd hat_matrix(const MatrixXd& x, const PriorSpec& prior, double sigma2);

struct SpectralReport {
  VectorXd per_candidate_max_eig;
  double combined_max_eig = 0.0;
  double combined_min_eig = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Checks that every candidate hat matrix has spectrum bounded by one and that
/// their w-weighted combination is PSD with spectrum bounded by one.
SpectralReport verify_lemma1(const MatrixXd& x, std::span<const PriorSpec> priors, double sigma2,
                             const VectorXd& w, double tol = 1e-9);

struct Lemma1Summary {
  int trials = 0;
  int failures = 0;
  double worst_candidate_max = -1.0;   // largest per-candidate max eigenvalue seen
  double worst_combined_max = -1.0;    // largest combined max eigenvalue seen
  double worst_combined_min = 1.0;     // smallest combined min eigenvalue seen
  int gprior_checks = 0;
  double worst_gprior_error = 0.0;     // max |lambda_max - g/(g+sigma2)|
  double tolerance = 0.0;

  bool pass() const { return failures == 0 && worst_gprior_error <= tolerance; }
};

/// Random instances: n <= 50, p <= 10, one to five candidates drawn from
/// isotropic, g and general SPD priors, random simplex weights.
Lemma1Summary run_lemma1_trials(int trials, std::uint64_t seed, double tol = 1e-9);

}  // namespace stackcast
