#include "stackcast/candidates.hpp"

#include "stackcast/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace stackcast {

namespace {

void require_positive(double v, const char* name) {
  require(std::isfinite(v) && v > 0.0, std::string(name) + " must be a positive finite number");
}

void require_spd(const MatrixXd& m, const char* name) {
  require(m.rows() >= 1 && m.rows() == m.cols(), std::string(name) + " must be a non-empty square matrix");
  require(m.allFinite(), std::string(name) + " contains non-finite entries");
  const double scale = m.cwiseAbs().maxCoeff();
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
          std::string(name) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  require(lo > 1e-10 * hi, std::string(name) + " is not positive definite");
}

MatrixXd spd_inverse(const MatrixXd& m, const char* what) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) fail(ErrorCode::numerical, std::string(what) + " is not positive definite");
  return llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
}

/// Cholesky factorization that rejects matrices which are not SPD to working
/// precision.
Eigen::LLT<MatrixXd> checked_llt(const MatrixXd& a, const std::string& label) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
    fail(ErrorCode::numerical, "candidate '" + label + "': singular system, X'X + sigma2 S^-1 is not positive definite");
  }
  return llt;
}

}  // namespace

PriorSpec PriorSpec::isotropic_normal(double gamma2) {
  require_positive(gamma2, "gamma2");
  return PriorSpec(IsotropicNormal{gamma2});
}

PriorSpec PriorSpec::g_prior(double g) {
  require_positive(g, "g");
  return PriorSpec(GPrior{g});
}

PriorSpec PriorSpec::general_normal(MatrixXd covariance) {
  require_spd(covariance, "prior covariance");
  return PriorSpec(GeneralNormal{std::move(covariance)});
}

PriorSpec PriorSpec::iso_normal_logistic(double lambda) {
  require_positive(lambda, "lambda");
  return PriorSpec(IsoNormalLogistic{lambda});
}

PriorSpec PriorSpec::multi_t(double nu, MatrixXd scale) {
  require_positive(nu, "nu");
  require_spd(scale, "T prior scale");
  return PriorSpec(MultiT{nu, std::move(scale)});
}

bool PriorSpec::is_normal() const noexcept { return !std::holds_alternative<MultiT>(variant_); }

std::optional<Index> PriorSpec::dimension() const {
  if (const auto* s = std::get_if<GeneralNormal>(&variant_)) return s->covariance.rows();
  if (const auto* t = std::get_if<MultiT>(&variant_)) return t->scale.rows();
  return std::nullopt;
}

std::string PriorSpec::describe() const {
  std::ostringstream out;
  out.precision(6);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, IsotropicNormal>) out << "gamma2=" << p.gamma2;
        else if constexpr (std::is_same_v<T, GPrior>) out << "g=" << p.g;
        else if constexpr (std::is_same_v<T, GeneralNormal>) out << "normal(S " << p.covariance.rows() << "x" << p.covariance.cols() << ")";
        else if constexpr (std::is_same_v<T, IsoNormalLogistic>) out << "lambda=" << p.lambda;
        else out << "t(nu=" << p.nu << ")";
      },
      variant_);
  return out.str();
}

void CandidateSpec::validate() const {
  const auto& v = prior.variant();
  if (family == Family::linear) {
    require_positive(sigma2, "sigma2");
    require(!std::holds_alternative<IsoNormalLogistic>(v),
            "candidate '" + label + "': use an isotropic normal prior for linear candidates");
  }
}

ResolvedPrior resolve_prior(const PriorSpec& prior, const MatrixXd& design) {
  const Index p = design.cols();
  if (const auto dim = prior.dimension()) {
    require(*dim == p, "prior dimension " + std::to_string(*dim) + " does not match " +
                           std::to_string(p) + " covariates");
  }
  ResolvedPrior out;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, IsotropicNormal>) {
          out.precision = MatrixXd::Identity(p, p) / v.gamma2;
        } else if constexpr (std::is_same_v<T, GPrior>) {
          MatrixXd xtx = design.transpose() * design;
          Eigen::LLT<MatrixXd> llt(xtx);
          if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
            fail(ErrorCode::numerical, "g prior requires a design of full column rank");
          }
          out.precision = xtx / v.g;
          out.g = v.g;
        } else if constexpr (std::is_same_v<T, GeneralNormal>) {
          out.precision = spd_inverse(v.covariance, "prior covariance");
        } else if constexpr (std::is_same_v<T, IsoNormalLogistic>) {
          out.precision = MatrixXd::Identity(p, p) / v.lambda;
        } else {
          out.kind = ResolvedPrior::Kind::student_t;
          out.nu = v.nu;
          out.precision = spd_inverse(v.scale, "T prior scale");
        }
      },
      prior.variant());
  return out;
}

PenaltyTerms prior_penalty(const ResolvedPrior& prior, const VectorXd& beta, bool with_hessian) {
  PenaltyTerms terms;
  const VectorXd pb = prior.precision * beta;
  const double quad = beta.dot(pb);
  if (prior.kind == ResolvedPrior::Kind::normal) {
    terms.value = 0.5 * quad;
    terms.gradient = pb;
    if (with_hessian) {
      terms.hessian = prior.precision;
      terms.convex_hessian = prior.precision;
    }
    return terms;
  }
  const double p = static_cast<double>(beta.size());
  const double nu = prior.nu;
  const double denom = nu + quad;
  terms.value = 0.5 * (nu + p) * std::log1p(quad / nu);
  terms.gradient = ((nu + p) / denom) * pb;
  if (with_hessian) {
    terms.convex_hessian = ((nu + p) / denom) * prior.precision;
    terms.hessian = terms.convex_hessian - (2.0 * (nu + p) / (denom * denom)) * (pb * pb.transpose());
  }
  return terms;
}

double expit(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

// ---- linear candidates -----------------------------------------------------

namespace {

// The g-prior shortcut is only valid on the design the prior was resolved
// against; refits on row subsets keep the pinned precision instead.
bool g_shortcut_applies(const ResolvedPrior& prior, const MatrixXd& xtx) {
  if (!prior.g) return false;
  return (xtx - *prior.g * prior.precision).norm() <= 1e-12 * xtx.norm();
}

}  // namespace

FitResult posterior_mean_linear(const MatrixXd& x, const VectorXd& y, const ResolvedPrior& prior,
                                double sigma2, const std::string& label) {
  require(prior.kind == ResolvedPrior::Kind::normal,
          "candidate '" + label + "': closed-form posterior mean needs a normal prior");
  require(y.size() == x.rows(), "outcome length does not match design rows");
  const MatrixXd xtx = x.transpose() * x;
  const VectorXd xty = x.transpose() * y;
  const MatrixXd system = xtx + sigma2 * prior.precision;

  FitResult fit;
  if (g_shortcut_applies(prior, xtx)) {
    // (1 + sigma2/g) X'X beta = X'y
    const auto llt = checked_llt(xtx, label);
    fit.beta = (*prior.g / (*prior.g + sigma2)) * llt.solve(xty);
  } else {
    const auto llt = checked_llt(system, label);
    fit.beta = llt.solve(xty);
  }
  fit.grad_norm = (system * fit.beta - xty).norm();
  fit.converged = true;
  fit.iterations = 1;
  return fit;
}

VectorXd hat_diag(const MatrixXd& x, const ResolvedPrior& prior, double sigma2, const std::string& label) {
  require(prior.kind == ResolvedPrior::Kind::normal,
          "candidate '" + label + "': hat matrix needs a normal prior");
  const MatrixXd xtx = x.transpose() * x;
  double factor = 1.0;
  MatrixXd z;
  if (g_shortcut_applies(prior, xtx)) {
    const auto llt = checked_llt(xtx, label);
    z = llt.matrixL().solve(x.transpose());
    factor = *prior.g / (*prior.g + sigma2);
  } else {
    const auto llt = checked_llt(xtx + sigma2 * prior.precision, label);
    z = llt.matrixL().solve(x.transpose());
  }
  return factor * z.colwise().squaredNorm().transpose();
}

ResolvedPrior resolve_prior(const CandidateSpec& spec, const MatrixXd& design) {
  try {
    return resolve_prior(spec.prior, design);
  } catch (const Error& e) {
    fail(e.code(), "candidate '" + spec.label + "': " + e.what());
  }
}

FitResult posterior_mean_linear(const Dataset& data, const CandidateSpec& spec) {
  require(spec.family == Family::linear, "candidate '" + spec.label + "' is not a linear candidate");
  spec.validate();
  return posterior_mean_linear(data.x, data.y, resolve_prior(spec, data.x), spec.sigma2, spec.label);
}

VectorXd hat_diag(const Dataset& data, const CandidateSpec& spec) {
  spec.validate();
  return hat_diag(data.x, resolve_prior(spec, data.x), spec.sigma2, spec.label);
}

// ---- MAP candidates --------------------------------------------------------

namespace {

struct Evaluation {
  double value = 0.0;
  VectorXd gradient;
  MatrixXd hessian;
  MatrixXd convex_hessian;
};

enum class Want { value, gradient, hessian };

class LogisticObjective {
 public:
  LogisticObjective(const MatrixXd& x, const VectorXd& y, const ResolvedPrior& prior)
      : x_(x), y_(y), prior_(prior) {}

  Evaluation operator()(const VectorXd& beta, Want want) const {
    Evaluation ev;
    const VectorXd eta = x_ * beta;
    const PenaltyTerms pen = prior_penalty(prior_, beta, want == Want::hessian);
    double nll = 0.0;
    for (Index i = 0; i < eta.size(); ++i) nll += softplus(eta[i]) - y_[i] * eta[i];
    ev.value = nll + pen.value;
    if (want == Want::value) return ev;

    VectorXd prob(eta.size());
    for (Index i = 0; i < eta.size(); ++i) prob[i] = expit(eta[i]);
    ev.gradient = x_.transpose() * (prob - y_) + pen.gradient;
    if (want == Want::hessian) {
      const VectorXd w = prob.array() * (1.0 - prob.array());
      const MatrixXd data_part = x_.transpose() * w.asDiagonal() * x_;
      ev.hessian = data_part + pen.hessian;
      ev.convex_hessian = data_part + pen.convex_hessian;
    }
    return ev;
  }

 private:
  const MatrixXd& x_;
  const VectorXd& y_;
  const ResolvedPrior& prior_;
};

class GaussianObjective {
 public:
  GaussianObjective(const MatrixXd& x, const VectorXd& y, const ResolvedPrior& prior, double sigma2)
      : x_(x), y_(y), prior_(prior), sigma2_(sigma2) {}

  Evaluation operator()(const VectorXd& beta, Want want) const {
    Evaluation ev;
    const VectorXd resid = x_ * beta - y_;
    const PenaltyTerms pen = prior_penalty(prior_, beta, want == Want::hessian);
    ev.value = 0.5 * resid.squaredNorm() / sigma2_ + pen.value;
    if (want == Want::value) return ev;
    ev.gradient = x_.transpose() * resid / sigma2_ + pen.gradient;
    if (want == Want::hessian) {
      const MatrixXd data_part = x_.transpose() * x_ / sigma2_;
      ev.hessian = data_part + pen.hessian;
      ev.convex_hessian = data_part + pen.convex_hessian;
    }
    return ev;
  }

 private:
  const MatrixXd& x_;
  const VectorXd& y_;
  const ResolvedPrior& prior_;
  double sigma2_;
};

std::optional<VectorXd> newton_direction(const MatrixXd& h, const VectorXd& g) {
  Eigen::LLT<MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) return std::nullopt;
  VectorXd d = -llt.solve(g);
  if (!d.allFinite() || !(d.dot(g) < 0.0)) return std::nullopt;
  return d;
}

template <typename Objective>
FitResult newton_minimize(const Objective& objective, VectorXd beta, const NewtonOptions& options) {
  FitResult fit;
  Evaluation ev = objective(beta, Want::hessian);
  for (int it = 0; it < options.max_iterations; ++it) {
    const double gnorm = ev.gradient.cwiseAbs().maxCoeff();
    if (gnorm <= options.grad_tol) break;
    ++fit.iterations;

    auto direction = newton_direction(ev.hessian, ev.gradient);
    if (!direction) {
      ++fit.fallback_steps;
      direction = newton_direction(ev.convex_hessian, ev.gradient);
    }
    VectorXd d = direction ? *direction : VectorXd(-ev.gradient);
    if (!direction) ++fit.fallback_steps;

    const double slope = ev.gradient.dot(d);
    if (-slope <= 1e-12 * (1.0 + std::abs(ev.value))) {
      // Predicted decrease is at the rounding level of the objective, where
      // Armijo comparisons are noise. Judge the full step by its gradient.
      Evaluation next = objective(beta + d, Want::hessian);
      if (next.gradient.cwiseAbs().maxCoeff() < gnorm) {
        beta += d;
        ev = std::move(next);
        continue;
      }
    }
    bool accepted = false;
    for (double t = 1.0; t >= 1e-12; t *= 0.5) {
      const VectorXd trial = beta + t * d;
      const double value = objective(trial, Want::value).value;
      if (std::isfinite(value) && value <= ev.value + options.armijo_c * t * slope) {
        beta = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Close to the optimum the objective decrease drops below rounding of
      // the objective itself; take the full step if it shrinks the gradient.
      const VectorXd trial = beta + d;
      Evaluation next = objective(trial, Want::hessian);
      if (!(next.gradient.cwiseAbs().maxCoeff() < gnorm)) break;
      beta = trial;
      ev = std::move(next);
      continue;
    }
    ev = objective(beta, Want::hessian);
  }
  fit.grad_norm = ev.gradient.cwiseAbs().maxCoeff();
  fit.converged = fit.grad_norm <= options.grad_tol;
  fit.beta = std::move(beta);
  return fit;
}

ResolvedPrior normal_counterpart(const ResolvedPrior& prior) {
  ResolvedPrior normal;
  normal.precision = prior.precision;
  return normal;
}

}  // namespace

ObjectiveValue neg_log_posterior_logistic(const VectorXd& beta, const MatrixXd& x, const VectorXd& y,
                                          const ResolvedPrior& prior) {
  require(beta.size() == x.cols(), "coefficient length does not match design columns");
  Evaluation ev = LogisticObjective(x, y, prior)(beta, Want::gradient);
  return {ev.value, std::move(ev.gradient)};
}

ObjectiveValue neg_log_posterior_logistic(const VectorXd& beta, const Dataset& data, const PriorSpec& prior) {
  require(std::holds_alternative<IsoNormalLogistic>(prior.variant()) ||
              std::holds_alternative<MultiT>(prior.variant()),
          "logistic posterior needs an isotropic normal (lambda) or multivariate T prior");
  return neg_log_posterior_logistic(beta, data.x, data.y, resolve_prior(prior, data.x));
}

ObjectiveValue neg_log_posterior_linear(const VectorXd& beta, const MatrixXd& x, const VectorXd& y,
                                        const ResolvedPrior& prior, double sigma2) {
  require(beta.size() == x.cols(), "coefficient length does not match design columns");
  Evaluation ev = GaussianObjective(x, y, prior, sigma2)(beta, Want::gradient);
  return {ev.value, std::move(ev.gradient)};
}

FitResult map_logistic(const MatrixXd& x, const VectorXd& y, const ResolvedPrior& prior,
                       const VectorXd* warm_start, const NewtonOptions& options) {
  require(y.size() == x.rows(), "outcome length does not match design rows");
  VectorXd start;
  if (warm_start) {
    start = *warm_start;
  } else if (prior.kind == ResolvedPrior::Kind::student_t) {
    const ResolvedPrior normal = normal_counterpart(prior);
    start = newton_minimize(LogisticObjective(x, y, normal), VectorXd::Zero(x.cols()), options).beta;
  } else {
    start = VectorXd::Zero(x.cols());
  }
  return newton_minimize(LogisticObjective(x, y, prior), std::move(start), options);
}

FitResult map_logistic(const Dataset& data, const CandidateSpec& spec) {
  require(spec.family == Family::logistic, "candidate '" + spec.label + "' is not a logistic candidate");
  spec.validate();
  return map_logistic(data.x, data.y, resolve_prior(spec, data.x));
}

FitResult map_linear(const MatrixXd& x, const VectorXd& y, const ResolvedPrior& prior, double sigma2,
                     const VectorXd* warm_start, const NewtonOptions& options) {
  require(y.size() == x.rows(), "outcome length does not match design rows");
  VectorXd start;
  if (warm_start) {
    start = *warm_start;
  } else {
    start = posterior_mean_linear(x, y, normal_counterpart(prior), sigma2, "map start").beta;
  }
  return newton_minimize(GaussianObjective(x, y, prior, sigma2), std::move(start), options);
}

FitResult fit_candidate(const MatrixXd& x, const VectorXd& y, const CandidateSpec& spec,
                        const ResolvedPrior& prior, const VectorXd* warm_start) {
  if (spec.family == Family::logistic) return map_logistic(x, y, prior, warm_start);
  if (prior.kind == ResolvedPrior::Kind::normal) return posterior_mean_linear(x, y, prior, spec.sigma2, spec.label);
  return map_linear(x, y, prior, spec.sigma2, warm_start);
}

FitResult fit_candidate(const Dataset& data, const CandidateSpec& spec) {
  spec.validate();
  return fit_candidate(data.x, data.y, spec, resolve_prior(spec, data.x));
}

VectorXd candidate_predictions(Family family, const MatrixXd& x, const VectorXd& beta) {
  require(x.cols() == beta.size(), "design has " + std::to_string(x.cols()) +
                                       " columns but the model expects " + std::to_string(beta.size()));
  VectorXd eta = x * beta;
  if (family == Family::logistic) {
    for (Index i = 0; i < eta.size(); ++i) eta[i] = expit(eta[i]);
  }
  return eta;
}

}  // namespace stackcast
