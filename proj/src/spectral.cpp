#include "stackcast/spectral.hpp"

#include "stackcast/error.hpp"
#include "stackcast/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace stackcast {

EigenRange extreme_eigs(const MatrixXd& m) {
  require(m.rows() >= 1 && m.rows() == m.cols(), "eigenvalues need a non-empty square matrix");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, "matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) fail(ErrorCode::numerical, "symmetric eigensolver did not converge");
  return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

MatrixXd hat_matrix(const MatrixXd& x, const PriorSpec& prior, double sigma2) {
  require(prior.is_normal() && !std::holds_alternative<IsoNormalLogistic>(prior.variant()),
          "family mismatch: hat matrices exist for normal-prior linear candidates only");
  const ResolvedPrior resolved = resolve_prior(prior, x);
  const MatrixXd system = x.transpose() * x + sigma2 * resolved.precision;
  Eigen::LLT<MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) fail(ErrorCode::numerical, "X'X + sigma2 S^-1 is not positive definite");
  const MatrixXd z = llt.matrixL().solve(x.transpose());
  const MatrixXd p = z.transpose() * z;
  return 0.5 * (p + p.transpose());
}

SpectralReport verify_lemma1(const MatrixXd& x, std::span<const PriorSpec> priors, double sigma2,
                             const VectorXd& w, double tol) {
  require(!priors.empty(), "at least one prior is required");
  require(static_cast<Index>(priors.size()) == w.size(), "weight length does not match prior count");
  require(x.rows() <= kMaxSpectralRows, "design has " + std::to_string(x.rows()) + " rows; the dense check is capped at " +
                                            std::to_string(kMaxSpectralRows));
  require(sigma2 > 0.0, "sigma2 must be positive");

  SpectralReport report;
  report.tolerance = tol;
  report.per_candidate_max_eig.resize(w.size());
  MatrixXd combined = MatrixXd::Zero(x.rows(), x.rows());
  for (std::size_t k = 0; k < priors.size(); ++k) {
    const MatrixXd p = hat_matrix(x, priors[k], sigma2);
    report.per_candidate_max_eig[static_cast<Index>(k)] = extreme_eigs(p).max;
    combined += w[static_cast<Index>(k)] * p;
  }
  const EigenRange range = extreme_eigs(combined);
  report.combined_max_eig = range.max;
  report.combined_min_eig = range.min;
  report.pass = report.per_candidate_max_eig.maxCoeff() <= 1.0 + tol && range.max <= 1.0 + tol &&
                range.min >= -tol;
  return report;
}

namespace {

double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * rng.uniform());
}

MatrixXd random_spd(Rng& rng, Index p) {
  MatrixXd a(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j) a(i, j) = rng.normal();
  MatrixXd s = a * a.transpose() / static_cast<double>(p) + 0.1 * MatrixXd::Identity(p, p);
  return log_uniform(rng, 1e-2, 1e2) * 0.5 * (s + s.transpose());
}

}  // namespace

Lemma1Summary run_lemma1_trials(int trials, std::uint64_t seed, double tol) {
  require(trials >= 1, "trial count must be positive");
  Lemma1Summary summary;
  summary.tolerance = tol;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    const auto p = static_cast<Index>(1 + rng.below(10));
    const auto n = static_cast<Index>(p + 1 + rng.below(static_cast<std::uint64_t>(50 - p)));
    MatrixXd x(n, p);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p; ++j) x(i, j) = rng.normal();
    const double sigma2 = log_uniform(rng, 0.1, 10.0);

    const auto k = static_cast<Index>(1 + rng.below(5));
    std::vector<PriorSpec> priors;
    std::vector<double> gs;
    for (Index c = 0; c < k; ++c) {
      switch (rng.below(3)) {
        case 0: priors.push_back(PriorSpec::isotropic_normal(log_uniform(rng, 1e-3, 1e3))); gs.push_back(0.0); break;
        case 1: {
          const double g = log_uniform(rng, 1e-2, 1e3);
          priors.push_back(PriorSpec::g_prior(g));
          gs.push_back(g);
          break;
        }
        default: priors.push_back(PriorSpec::general_normal(random_spd(rng, p))); gs.push_back(0.0); break;
      }
    }
    VectorXd w(k);
    for (Index c = 0; c < k; ++c) w[c] = -std::log(rng.uniform());
    w /= w.sum();

    const SpectralReport report = verify_lemma1(x, priors, sigma2, w, tol);
    ++summary.trials;
    if (!report.pass) ++summary.failures;
    summary.worst_candidate_max = std::max(summary.worst_candidate_max, report.per_candidate_max_eig.maxCoeff());
    summary.worst_combined_max = std::max(summary.worst_combined_max, report.combined_max_eig);
    summary.worst_combined_min = std::min(summary.worst_combined_min, report.combined_min_eig);
    for (Index c = 0; c < k; ++c) {
      const double g = gs[static_cast<std::size_t>(c)];
      if (g <= 0.0) continue;
      ++summary.gprior_checks;
      const double expected = g / (g + sigma2);
      summary.worst_gprior_error =
          std::max(summary.worst_gprior_error, std::abs(report.per_candidate_max_eig[c] - expected));
    }
  }
  return summary;
}

}  // namespace stackcast
