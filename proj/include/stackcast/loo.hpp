#pragma once

#include "stackcast/candidates.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stackcast {

enum class CvKind { loo_closed_form, loo_refit, kfold };

struct CvScheme {
  CvKind kind = CvKind::loo_closed_form;
  int folds = 10;
  std::uint64_t seed = 0;

  static CvScheme loo_closed_form() { return {CvKind::loo_closed_form, 0, 0}; }
  static CvScheme loo_refit() { return {CvKind::loo_refit, 0, 0}; }
  static CvScheme kfold(int folds, std::uint64_t seed) { return {CvKind::kfold, folds, seed}; }

  std::string describe() const;
};

/// Out-of-sample predictions, one column per candidate.
struct CvPredictionMatrix {
  MatrixXd values;
  CvScheme scheme;
  std::vector<std::string> labels;
};

/// Outcome minus out-of-sample prediction, one column per candidate.
struct ResidualMatrix {
  MatrixXd values;
};

/// Rows whose leverage exceeds this are rejected by the closed form.
inline constexpr double kMaxLeverage = 1.0 - 1e-12;

/// Leave-one-out predictions of a normal-prior linear candidate from a single
/// full-data fit: (yhat_i - h_ii y_i) / (1 - h_ii).
VectorXd loo_linear_closed_form(const Dataset& data, const CandidateSpec& spec);

/// Literal leave-one-out: n refits, each with the prior pinned to the full
/// design. Works for every linear prior (Student T by MAP).
VectorXd loo_linear_refit(const Dataset& data, const CandidateSpec& spec);

/// Fold label per row: a seeded permutation cut into contiguous blocks whose
/// sizes differ by at most one. With `require_both_classes`, assignments that
/// leave a single-class training fold are redrawn (up to 10 attempts).
std::vector<int> assign_folds(const VectorXd& y, int folds, std::uint64_t seed,
                              bool require_both_classes);

/// Predictions for each row from the fit that excludes that row's fold.
VectorXd kfold_predictions(const Dataset& data, const CandidateSpec& spec,
                           std::span<const int> fold_of, int folds);

/// K-fold cross-validated probabilities of a logistic candidate.
VectorXd kfold_logistic(const Dataset& data, const CandidateSpec& spec, int folds,
                        std::uint64_t seed);

/// Out-of-sample prediction matrix for a candidate list; fold assignment is
/// shared across candidates.
CvPredictionMatrix cv_predictions(const Dataset& data, std::span<const CandidateSpec> specs,
                                  const CvScheme& scheme);

ResidualMatrix residuals(const VectorXd& y, const CvPredictionMatrix& predictions);

}  // namespace stackcast
