#include "stackcast/loo.hpp"

#include "stackcast/error.hpp"
#include "stackcast/rng.hpp"

#include <numeric>

namespace stackcast {

std::string CvScheme::describe() const {
  switch (kind) {
    case CvKind::loo_closed_form: return "loo_closed_form";
    case CvKind::loo_refit: return "loo_refit";
    case CvKind::kfold: return "kfold(" + std::to_string(folds) + ")";
  }
  return "unknown";
}

namespace {

MatrixXd drop_row(const MatrixXd& m, Index skip) {
  MatrixXd out(m.rows() - 1, m.cols());
  out.topRows(skip) = m.topRows(skip);
  out.bottomRows(m.rows() - skip - 1) = m.bottomRows(m.rows() - skip - 1);
  return out;
}

VectorXd drop_entry(const VectorXd& v, Index skip) {
  VectorXd out(v.size() - 1);
  out.head(skip) = v.head(skip);
  out.tail(v.size() - skip - 1) = v.tail(v.size() - skip - 1);
  return out;
}

std::string annotate(const CandidateSpec& spec, const std::string& what) {
  return "candidate '" + spec.label + "': " + what;
}

}  // namespace

VectorXd loo_linear_closed_form(const Dataset& data, const CandidateSpec& spec) {
  require(spec.family == Family::linear, annotate(spec, "closed-form LOO needs a linear candidate"));
  spec.validate();
  const ResolvedPrior prior = resolve_prior(spec, data.x);
  require(prior.kind == ResolvedPrior::Kind::normal,
          annotate(spec, "closed-form LOO needs a normal prior; use the refit scheme"));

  const FitResult fit = posterior_mean_linear(data.x, data.y, prior, spec.sigma2, spec.label);
  const VectorXd h = hat_diag(data.x, prior, spec.sigma2, spec.label);
  const VectorXd fitted = data.x * fit.beta;

  VectorXd out(data.rows());
  for (Index i = 0; i < data.rows(); ++i) {
    if (!(h[i] < kMaxLeverage)) {
      fail(ErrorCode::numerical, annotate(spec, "ill-conditioned leverage " + std::to_string(h[i]) +
                                                    " at row " + std::to_string(i)));
    }
    out[i] = (fitted[i] - h[i] * data.y[i]) / (1.0 - h[i]);
  }
  return out;
}

VectorXd loo_linear_refit(const Dataset& data, const CandidateSpec& spec) {
  require(spec.family == Family::linear, annotate(spec, "LOO refit needs a linear candidate"));
  spec.validate();
  require(data.rows() >= 2, "leave-one-out needs at least two rows");
  const ResolvedPrior prior = resolve_prior(spec, data.x);

  std::optional<VectorXd> warm;
  if (prior.kind == ResolvedPrior::Kind::student_t) {
    warm = map_linear(data.x, data.y, prior, spec.sigma2).beta;
  }

  VectorXd out(data.rows());
  for (Index i = 0; i < data.rows(); ++i) {
    const MatrixXd x = drop_row(data.x, i);
    const VectorXd y = drop_entry(data.y, i);
    FitResult fit;
    try {
      fit = fit_candidate(x, y, spec, prior, warm ? &*warm : nullptr);
    } catch (const Error& e) {
      fail(e.code(), annotate(spec, "leaving out row " + std::to_string(i) + ": " + e.what()));
    }
    out[i] = data.x.row(i).dot(fit.beta);
  }
  return out;
}

std::vector<int> assign_folds(const VectorXd& y, int folds, std::uint64_t seed, bool require_both_classes) {
  const auto n = static_cast<int>(y.size());
  require(folds >= 2 && folds <= n, "fold count must lie in [2, n]");
  constexpr int kMaxAttempts = 10;

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<int>(order));

    std::vector<int> fold_of(static_cast<std::size_t>(n));
    const int base = n / folds;
    const int extra = n % folds;
    int pos = 0;
    for (int f = 0; f < folds; ++f) {
      const int size = base + (f < extra ? 1 : 0);
      for (int k = 0; k < size; ++k) fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(pos++)])] = f;
    }
    if (!require_both_classes) return fold_of;

    // Each training set (all rows outside fold f) must contain both classes.
    const double ones_total = y.sum();
    std::vector<double> ones(static_cast<std::size_t>(folds), 0.0);
    std::vector<int> sizes(static_cast<std::size_t>(folds), 0);
    for (int i = 0; i < n; ++i) {
      ones[static_cast<std::size_t>(fold_of[static_cast<std::size_t>(i)])] += y[i];
      ++sizes[static_cast<std::size_t>(fold_of[static_cast<std::size_t>(i)])];
    }
    bool ok = true;
    for (int f = 0; f < folds && ok; ++f) {
      const double train_ones = ones_total - ones[static_cast<std::size_t>(f)];
      const double train_size = n - sizes[static_cast<std::size_t>(f)];
      ok = train_ones > 0.0 && train_ones < train_size;
    }
    if (ok) return fold_of;
  }
  fail(ErrorCode::numerical, "could not draw folds whose training sets contain both outcome classes after " +
                                 std::to_string(kMaxAttempts) + " attempts; try another seed or fewer folds");
}

VectorXd kfold_predictions(const Dataset& data, const CandidateSpec& spec, std::span<const int> fold_of,
                           int folds) {
  spec.validate();
  require(static_cast<Index>(fold_of.size()) == data.rows(), "fold assignment length does not match rows");
  const ResolvedPrior prior = resolve_prior(spec, data.x);
  const FitResult full = fit_candidate(data.x, data.y, spec, prior);

  VectorXd out(data.rows());
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> train;
    std::vector<Index> held;
    for (Index i = 0; i < data.rows(); ++i) {
      (fold_of[static_cast<std::size_t>(i)] == f ? held : train).push_back(i);
    }
    if (held.empty()) continue;
    const Dataset sub = data.subset(train);
    FitResult fit;
    try {
      fit = fit_candidate(sub.x, sub.y, spec, prior, &full.beta);
    } catch (const Error& e) {
      fail(e.code(), annotate(spec, "fold " + std::to_string(f) + ": " + e.what()));
    }
    for (const Index i : held) {
      const double eta = data.x.row(i).dot(fit.beta);
      out[i] = spec.family == Family::logistic ? expit(eta) : eta;
    }
  }
  return out;
}

VectorXd kfold_logistic(const Dataset& data, const CandidateSpec& spec, int folds, std::uint64_t seed) {
  require(spec.family == Family::logistic, annotate(spec, "K-fold logistic CV needs a logistic candidate"));
  const auto fold_of = assign_folds(data.y, folds, seed, true);
  return kfold_predictions(data, spec, fold_of, folds);
}

CvPredictionMatrix cv_predictions(const Dataset& data, std::span<const CandidateSpec> specs,
                                  const CvScheme& scheme) {
  require(!specs.empty(), "at least one candidate is required");
  CvPredictionMatrix out;
  out.scheme = scheme;
  out.values.resize(data.rows(), static_cast<Index>(specs.size()));

  std::vector<int> fold_of;
  if (scheme.kind == CvKind::kfold) {
    fold_of = assign_folds(data.y, scheme.folds, scheme.seed, data.family == Family::logistic);
  }
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const CandidateSpec& spec = specs[k];
    VectorXd column;
    switch (scheme.kind) {
      case CvKind::loo_closed_form: column = loo_linear_closed_form(data, spec); break;
      case CvKind::loo_refit: column = loo_linear_refit(data, spec); break;
      case CvKind::kfold: column = kfold_predictions(data, spec, fold_of, scheme.folds); break;
    }
    out.values.col(static_cast<Index>(k)) = column;
    out.labels.push_back(spec.label);
  }
  return out;
}

ResidualMatrix residuals(const VectorXd& y, const CvPredictionMatrix& predictions) {
  require(y.size() == predictions.values.rows(), "outcome length " + std::to_string(y.size()) +
                                                     " does not match " +
                                                     std::to_string(predictions.values.rows()) +
                                                     " prediction rows");
  ResidualMatrix out;
  out.values = (-predictions.values).colwise() + y;
  return out;
}

}  // namespace stackcast
