#pragma once

#include "stackcast/dataset.hpp"

#include <optional>
#include <string>
#include <variant>

namespace stackcast {

// Prior variants. Normal variants give closed-form linear candidates; the
// logistic-normal and multivariate-T variants are fitted by MAP.
struct IsotropicNormal { double gamma2; };       // beta ~ N(0, gamma2 I)
struct GPrior { double g; };                      // beta ~ N(0, g (X'X)^-1)
struct GeneralNormal { MatrixXd covariance; };    // beta ~ N(0, S)
struct IsoNormalLogistic { double lambda; };      // beta ~ N(0, lambda I)
struct MultiT { double nu; MatrixXd scale; };     // beta ~ T_p(nu, scale)

/// Validated prior. Scale parameters are strictly positive and
/// matrices symmetric positive definite; both are checked on construction.
class PriorSpec {
 public:
  using Variant = std::variant<IsotropicNormal, GPrior, GeneralNormal, IsoNormalLogistic, MultiT>;

  static PriorSpec isotropic_normal(double gamma2);
  static PriorSpec g_prior(double g);
  static PriorSpec general_normal(MatrixXd covariance);
  static PriorSpec iso_normal_logistic(double lambda);
  static PriorSpec multi_t(double nu, MatrixXd scale);

  const Variant& variant() const noexcept { return variant_; }

  /// True for the variants whose linear posterior mean has a closed form.
  bool is_normal() const noexcept;

  /// Required coefficient dimension, when the prior fixes one.
  std::optional<Index> dimension() const;

  /// Short human-readable description, e.g. "g=0.5".
  std::string describe() const;

 private:
  explicit PriorSpec(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

struct CandidateSpec {
  Family family = Family::linear;
  PriorSpec prior;
  double sigma2 = 1.0;  // known likelihood variance, linear family only
  std::string label;

  void validate() const;
};

struct FitResult {
  VectorXd beta;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  int fallback_steps = 0;  // Newton steps replaced by a safer direction
};

/// The prior evaluated against a design: penalty(beta) is a quadratic form in
/// `precision` (normal) or its log1p transform (Student T). Design-dependent
/// priors such as the g prior are pinned to the design they were resolved on,
/// so cross-validation refits keep the full-data prior.
struct ResolvedPrior {
  enum class Kind { normal, student_t };
  Kind kind = Kind::normal;
  MatrixXd precision;
  double nu = 0.0;
  std::optional<double> g;  // set for the g prior, enables the scaled-projection path
};

ResolvedPrior resolve_prior(const PriorSpec& prior, const MatrixXd& design);
/// Same, with errors prefixed by the candidate's label.
ResolvedPrior resolve_prior(const CandidateSpec& spec, const MatrixXd& design);

struct PenaltyTerms {
  double value = 0.0;
  VectorXd gradient;
  MatrixXd hessian;         // exact Hessian
  MatrixXd convex_hessian;  // positive-definite part (equals hessian for normal priors)
};

PenaltyTerms prior_penalty(const ResolvedPrior& prior, const VectorXd& beta, bool with_hessian);

/// Overflow-safe logistic function.
double expit(double t);

/// log(1 + exp(t)) without overflow.
double softplus(double t);

// ---- linear candidates -----------------------------------------------------

/// Posterior mean (X'X + sigma2 S^-1)^-1 X'y under a normal prior.
FitResult posterior_mean_linear(const Dataset& data, const CandidateSpec& spec);

/// Diagonal of the hat matrix X (X'X + sigma2 S^-1)^-1 X', one row at a time.
VectorXd hat_diag(const Dataset& data, const CandidateSpec& spec);

/// Core routines on an explicit design with an already-resolved prior.
FitResult posterior_mean_linear(const MatrixXd& x, const VectorXd& y, const ResolvedPrior& prior,
                                double sigma2, const std::string& label);
VectorXd hat_diag(const MatrixXd& x, const ResolvedPrior& prior, double sigma2,
                  const std::string& label);

// ---- MAP candidates --------------------------------------------------------

struct ObjectiveValue {
  double value = 0.0;
  VectorXd gradient;
};

/// Negative log posterior of a Bernoulli-logit model (constants dropped).
ObjectiveValue neg_log_posterior_logistic(const VectorXd& beta, const Dataset& data,
                                          const PriorSpec& prior);
ObjectiveValue neg_log_posterior_logistic(const VectorXd& beta, const MatrixXd& x,
                                          const VectorXd& y, const ResolvedPrior& prior);

/// Negative log posterior of a Gaussian linear model with known sigma2.
ObjectiveValue neg_log_posterior_linear(const VectorXd& beta, const MatrixXd& x,
                                        const VectorXd& y, const ResolvedPrior& prior,
                                        double sigma2);

struct NewtonOptions {
  double grad_tol = 1e-8;  // infinity norm
  int max_iterations = 100;
  double armijo_c = 1e-4;
};

/// MAP estimate of a logistic candidate by damped Newton with Armijo
/// backtracking. A Student-T prior starts from the normal-prior MAP that
/// shares its scale matrix unless a warm start is given.
FitResult map_logistic(const Dataset& data, const CandidateSpec& spec);
FitResult map_logistic(const MatrixXd& x, const VectorXd& y, const ResolvedPrior& prior,
                       const VectorXd* warm_start = nullptr, const NewtonOptions& options = {});

/// MAP estimate of a Gaussian linear candidate under a Student-T prior.
FitResult map_linear(const MatrixXd& x, const VectorXd& y, const ResolvedPrior& prior, double sigma2,
                     const VectorXd* warm_start = nullptr, const NewtonOptions& options = {});

/// Point estimate of any candidate on the given data, with the prior resolved
/// against `prior_design` (normally the full training design).
FitResult fit_candidate(const MatrixXd& x, const VectorXd& y, const CandidateSpec& spec,
                        const ResolvedPrior& prior, const VectorXd* warm_start = nullptr);
FitResult fit_candidate(const Dataset& data, const CandidateSpec& spec);

/// Point predictions x*beta (linear) or expit(x*beta) (logistic).
VectorXd candidate_predictions(Family family, const MatrixXd& x, const VectorXd& beta);

}  // namespace stackcast
