#pragma once

#include "stackcast/weights.hpp"

#include <filesystem>
#include <vector>

namespace stackcast {

/// A fitted stack: full-data candidate fits, cross-validated weights and the
/// candidate with the smallest cross-validation error.
struct StackModel {
  Family family = Family::linear;
  std::vector<CandidateSpec> specs;
  std::vector<FitResult> fits;
  WeightVector weights;
  Index best_index = 0;
  VectorXd cv_errors;  // |e_k|^2 per candidate
  CvScheme scheme;
  std::vector<std::string> covariate_names;

  Index size() const { return static_cast<Index>(specs.size()); }

  /// Cross-validation criterion of the stacked combination (w'Sw).
  double stacked_cv_error() const { return weights.objective; }
};

/// Cross-validates every candidate, solves for the simplex weights and refits
/// all candidates on the full data.
StackModel fit_stack(const Dataset& data, std::vector<CandidateSpec> specs, const CvScheme& scheme);

/// Stacked prediction: sum_k w_k x beta_k, or sum_k w_k expit(x beta_k) for
/// logistic stacks (probabilities are combined, never coefficients).
VectorXd predict(const StackModel& model, const MatrixXd& x_new);

/// Prediction of a single candidate of the stack.
VectorXd predict_candidate(const StackModel& model, Index k, const MatrixXd& x_new);

/// Index of the smallest entry, ties resolved to the lowest index.
Index argmin_lowest(const VectorXd& values);

/// Accumulates per-replication test losses of the stack and the selected
/// candidate. The ratio is a ratio of means, not a mean of ratios.
class RatioAccumulator {
 public:
  void add(double stacked_loss, double best_loss);

  std::size_t count() const { return stacked_.size(); }
  double mean_stacked() const;
  double mean_best() const;

  /// mean(stacked) / mean(best); throws when the denominator is zero.
  double ratio() const;

  /// Delta-method standard error of ratio(); zero with fewer than two
  /// replications.
  double standard_error() const;

 private:
  std::vector<double> stacked_;
  std::vector<double> best_;
};

double squared_error(const VectorXd& truth, const VectorXd& prediction);

/// Adds one replication's losses |mu - stacked|^2 and |mu - best|^2 and
/// returns the running ratio.
double ratio_linear(const VectorXd& truth_mu, const VectorXd& stacked, const VectorXd& best,
                    RatioAccumulator& accumulator);

/// Same as ratio_linear with true probabilities in place of means.
double ratio_logistic(const VectorXd& truth_p, const VectorXd& stacked, const VectorXd& best,
                      RatioAccumulator& accumulator);

// ---- serialization ----------------------------------------------------------

std::string model_to_json(const StackModel& model);
StackModel model_from_json(std::string_view text);
void save_model(const StackModel& model, const std::filesystem::path& path);
StackModel load_model(const std::filesystem::path& path);

}  // namespace stackcast
