#pragma once

#include "stackcast/loo.hpp"

namespace stackcast {

/// S = e'e for the cross-validation residual matrix e; w'Sw is the
/// cross-validated squared error of the w-weighted combination.
struct GramMatrix {
  MatrixXd s;
};

struct WeightVector {
  VectorXd w;
  double objective = 0.0;     // w'Sw
  double kkt_residual = 0.0;  // fixed-point residual of projected gradient
  int iterations = 0;
  bool converged = false;
};

struct SolverOptions {
  double tolerance_factor = 1e-9;  // tolerance = factor * (1 + trace(S)/K)
  int max_iterations = 10000;
  bool polish = true;              // exact solve on the identified support
};

GramMatrix gram(const ResidualMatrix& residuals);

/// Euclidean projection onto {w >= 0, sum w = 1} (sort and threshold).
VectorXd project_simplex(const VectorXd& v);

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_max_eigenvalue(const MatrixXd& s, int max_iterations = 1000, double rel_tol = 1e-12);

/// Residual |w - P(w - S w / L)| with L the largest eigenvalue of S; zero
/// exactly at minimizers of w'Sw over the simplex.
double kkt_check(const GramMatrix& gram, const VectorXd& w);

/// Simplex-constrained minimizer of w'Sw by accelerated projected gradient
/// with adaptive restart, started from uniform weights. Duplicate candidates
/// make the minimizer non-unique; the iteration's deterministic limit is
/// returned in that case.
WeightVector solve_weights(const GramMatrix& gram, const SolverOptions& options = {});

}  // namespace stackcast
