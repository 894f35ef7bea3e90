#pragma once

#include "stackcast/candidates.hpp"
#include "stackcast/rng.hpp"

#include <algorithm>
#include <cmath>

namespace testing {

using stackcast::MatrixXd;
using stackcast::VectorXd;
using stackcast::Index;

inline MatrixXd normal_matrix(stackcast::Rng& rng, Index rows, Index cols) {
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline VectorXd normal_vector(stackcast::Rng& rng, Index n) { return normal_matrix(rng, n, 1).col(0); }

// Well-conditioned SPD matrix: A A' / p + shift I.
inline MatrixXd random_spd(stackcast::Rng& rng, Index p, double shift = 0.5) {
  const MatrixXd a = normal_matrix(rng, p, p);
  MatrixXd s = a * a.transpose() / static_cast<double>(p) + shift * MatrixXd::Identity(p, p);
  return 0.5 * (s + s.transpose());
}

inline double max_rel_diff(const VectorXd& a, const VectorXd& b) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / (1.0 + std::abs(b[i])));
  return worst;
}

}  // namespace testing
