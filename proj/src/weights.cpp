#include "stackcast/weights.hpp"

#include "stackcast/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace stackcast {

GramMatrix gram(const ResidualMatrix& residuals) {
  require(residuals.values.allFinite(), "residual matrix contains non-finite entries");
  const MatrixXd s = residuals.values.transpose() * residuals.values;
  return {0.5 * (s + s.transpose())};
}

VectorXd project_simplex(const VectorXd& v) {
  require(v.size() >= 1 && v.allFinite(), "simplex projection needs a finite, non-empty vector");
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double threshold = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) threshold = candidate;
  }
  return (v.array() - threshold).cwiseMax(0.0).matrix();
}

double power_max_eigenvalue(const MatrixXd& s, int max_iterations, double rel_tol) {
  const Index k = s.rows();
  if (k == 1) return s(0, 0);
  // Irrational-increment start vector, so it is not orthogonal to the leading
  // eigenvector of the usual structured cases (e.g. (1, -1)).
  VectorXd v(k);
  for (Index i = 0; i < k; ++i) v[i] = 1.0 + std::fmod(0.6180339887498949 * static_cast<double>(i + 1), 1.0);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    const VectorXd u = s * v;
    const double norm = u.norm();
    if (norm == 0.0) return 0.0;
    const double next = v.dot(u);
    v = u / norm;
    if (it > 0 && std::abs(next - lambda) <= rel_tol * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

namespace {

double quad(const MatrixXd& s, const VectorXd& w) { return w.dot(s * w); }

double fixed_point_residual(const MatrixXd& s, const VectorXd& w, double lipschitz) {
  if (!(lipschitz > 0.0)) return 0.0;
  return (w - project_simplex(w - s * w / lipschitz)).norm();
}

VectorXd clip_and_renormalize(VectorXd w) {
  for (Index k = 0; k < w.size(); ++k) {
    if (w[k] < 1e-12) w[k] = 0.0;
  }
  const double total = w.sum();
  return total > 0.0 ? VectorXd(w / total) : VectorXd(VectorXd::Constant(w.size(), 1.0 / static_cast<double>(w.size())));
}

/// Minimizer of w'Sw on the face {w_k = 0 outside the support, sum w = 1},
/// when that bordered system is non-singular and its solution is feasible.
std::optional<VectorXd> solve_on_support(const MatrixXd& s, const VectorXd& w) {
  std::vector<Index> support;
  for (Index k = 0; k < w.size(); ++k) {
    if (w[k] > 0.0) support.push_back(k);
  }
  const auto m = static_cast<Index>(support.size());
  if (m == 0) return std::nullopt;
  MatrixXd kkt = MatrixXd::Zero(m + 1, m + 1);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) kkt(a, b) = s(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(b)]);
    kkt(a, m) = 1.0;
    kkt(m, a) = 1.0;
  }
  VectorXd rhs = VectorXd::Zero(m + 1);
  rhs[m] = 1.0;
  Eigen::FullPivLU<MatrixXd> lu(kkt);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) return std::nullopt;
  const VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) return std::nullopt;
  VectorXd out = VectorXd::Zero(w.size());
  for (Index a = 0; a < m; ++a) {
    if (sol[a] < 0.0) return std::nullopt;
    out[support[static_cast<std::size_t>(a)]] = sol[a];
  }
  return out / out.sum();
}

}  // namespace

double kkt_check(const GramMatrix& gram, const VectorXd& w) {
  require(gram.s.rows() == w.size(), "weight length does not match the Gram matrix");
  return fixed_point_residual(gram.s, w, power_max_eigenvalue(gram.s));
}

WeightVector solve_weights(const GramMatrix& gram, const SolverOptions& options) {
  const MatrixXd& s = gram.s;
  const Index k = s.rows();
  require(k >= 1 && s.cols() == k, "Gram matrix must be square and non-empty");
  require(s.allFinite(), "Gram matrix contains non-finite entries");
  require((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff()),
          "Gram matrix is not symmetric");

  WeightVector out;
  if (k == 1) {
    out.w = VectorXd::Ones(1);
    out.objective = s(0, 0);
    out.converged = true;
    return out;
  }

  const double lipschitz = power_max_eigenvalue(s);
  const double tolerance = options.tolerance_factor * (1.0 + s.trace() / static_cast<double>(k));
  VectorXd w = VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  if (!(lipschitz > 0.0)) {
    out.w = w;
    out.objective = quad(s, w);
    out.converged = true;
    return out;
  }

  VectorXd y = w;
  double t = 1.0;
  double f = quad(s, w);
  VectorXd best = w;
  double best_f = f;
  double residual = fixed_point_residual(s, w, lipschitz);
  int it = 0;
  while (residual > tolerance && it < options.max_iterations) {
    ++it;
    const VectorXd next = project_simplex(y - s * y / lipschitz);
    const double f_next = quad(s, next);
    if (f_next > f) {
      // Momentum overshot: restart from the current iterate.
      t = 1.0;
      y = w;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - w);
    w = next;
    f = f_next;
    t = t_next;
    if (f <= best_f) {
      best = w;
      best_f = f;
    }
    residual = fixed_point_residual(s, w, lipschitz);
  }
  if (residual > tolerance) w = best;

  w = clip_and_renormalize(w);
  residual = fixed_point_residual(s, w, lipschitz);
  if (options.polish) {
    if (auto exact = solve_on_support(s, w)) {
      const double r = fixed_point_residual(s, *exact, lipschitz);
      const double fe = quad(s, *exact);
      if (r <= std::max(residual, tolerance) && fe <= quad(s, w) + 1e-14 * std::abs(quad(s, w))) {
        w = clip_and_renormalize(*exact);
        residual = fixed_point_residual(s, w, lipschitz);
      }
    }
  }

  out.w = w;
  out.objective = quad(s, w);
  out.kkt_residual = residual;
  out.iterations = it;
  out.converged = residual <= tolerance;
  return out;
}

}  // namespace stackcast
