#include "stackcast/error.hpp"
#include "stackcast/loo.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

using namespace stackcast;
using testing::normal_matrix;
using testing::normal_vector;
using testing::random_spd;

namespace {

CandidateSpec linear_spec(PriorSpec prior, double sigma2 = 1.0, std::string label = "c") {
  return {Family::linear, std::move(prior), sigma2, std::move(label)};
}

Dataset linear_data(Rng& rng, Index n, Index p) {
  Dataset d;
  d.x = normal_matrix(rng, n, p);
  d.y = d.x * normal_vector(rng, p) + normal_vector(rng, n);
  return d;
}

Dataset logistic_data(Rng& rng, Index n, Index p) {
  Dataset d;
  d.family = Family::logistic;
  d.x = normal_matrix(rng, n, p);
  const VectorXd eta = d.x * normal_vector(rng, p);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) d.y[i] = rng.bernoulli(expit(eta[i])) ? 1.0 : 0.0;
  return d;
}

}  // namespace

TEST_CASE("closed-form LOO agrees with brute-force refits") {
  Rng rng(21);
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const Dataset d = linear_data(rng, 30, 5);
    const double sigma2 = std::exp(0.5 * rng.normal());
    const PriorSpec priors[] = {PriorSpec::isotropic_normal(std::exp(2.0 * rng.normal())),
                                PriorSpec::g_prior(std::exp(2.0 * rng.normal())),
                                PriorSpec::general_normal(random_spd(rng, 5))};
    for (const PriorSpec& prior : priors) {
      const CandidateSpec spec = linear_spec(prior, sigma2);
      const VectorXd closed = loo_linear_closed_form(d, spec);
      const VectorXd refit = loo_linear_refit(d, spec);
      for (Index i = 0; i < d.rows(); ++i) {
        worst = std::max(worst, std::abs(closed[i] - refit[i]) / (1.0 + std::abs(refit[i])));
      }
    }
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("closed form matches the residual decomposition") {
  // y - ytilde = (I + Q)(I - P) y with Q = diag(P_ii / (1 - P_ii)).
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset d = linear_data(rng, 25, 4);
    const MatrixXd s = random_spd(rng, 4);
    const double sigma2 = 0.8;
    const VectorXd loo = loo_linear_closed_form(d, linear_spec(PriorSpec::general_normal(s), sigma2));
    const MatrixXd p = d.x * (d.x.transpose() * d.x + sigma2 * s.inverse()).ldlt().solve(d.x.transpose());
    const VectorXd q = p.diagonal().array() / (1.0 - p.diagonal().array());
    const VectorXd expected = (VectorXd::Ones(25) + q).asDiagonal() * (d.y - p * d.y);
    CHECK(((d.y - loo) - expected).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("hand-sized LOO") {
  Dataset d;
  d.x = MatrixXd{{1.0}, {1.0}};
  d.y = VectorXd{{0.0, 2.0}};
  // sigma2 / gamma2 = 1: leaving out row 0 gives beta = 2 / 2.
  const CandidateSpec spec = linear_spec(PriorSpec::isotropic_normal(1.0));
  const VectorXd refit = loo_linear_refit(d, spec);
  const VectorXd closed = loo_linear_closed_form(d, spec);
  CHECK(refit[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(refit[1] == doctest::Approx(0.0));
  CHECK(closed[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(closed[1]) < 1e-15);
}

TEST_CASE("LOO special cases") {
  Rng rng(23);
  SUBCASE("noiseless data are reproduced") {
    Dataset d;
    d.x = normal_matrix(rng, 20, 3);
    d.y = d.x * VectorXd{{1.0, -2.0, 0.5}};
    const VectorXd loo = loo_linear_closed_form(d, linear_spec(PriorSpec::isotropic_normal(1e12)));
    CHECK(testing::max_rel_diff(loo, d.y) < 1e-8);
  }
  SUBCASE("zero-leverage row keeps its fitted value") {
    Dataset d = linear_data(rng, 15, 3);
    d.x.row(4).setZero();
    const CandidateSpec spec = linear_spec(PriorSpec::isotropic_normal(2.0));
    const VectorXd loo = loo_linear_closed_form(d, spec);
    const VectorXd fitted = d.x * posterior_mean_linear(d, spec).beta;
    CHECK(loo[4] == fitted[4]);
  }
  SUBCASE("zero outcomes") {
    Dataset d = linear_data(rng, 12, 3);
    d.y.setZero();
    for (const PriorSpec& prior : {PriorSpec::g_prior(2.0), PriorSpec::isotropic_normal(0.3)}) {
      CHECK(loo_linear_closed_form(d, linear_spec(prior)).cwiseAbs().maxCoeff() == 0.0);
      CHECK(loo_linear_refit(d, linear_spec(prior)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("full leverage is rejected with row and label") {
    Dataset d;
    d.x = normal_matrix(rng, 3, 3);
    d.y = normal_vector(rng, 3);
    try {
      loo_linear_closed_form(d, linear_spec(PriorSpec::isotropic_normal(1e300), 1.0, "flat"));
      FAIL("expected a leverage error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::numerical);
      const std::string msg = e.what();
      CHECK(msg.find("flat") != std::string::npos);
      CHECK(msg.find("row") != std::string::npos);
    }
  }
  SUBCASE("T priors go through refits") {
    const Dataset d = linear_data(rng, 20, 3);
    const CandidateSpec spec = linear_spec(PriorSpec::multi_t(3.0, MatrixXd::Identity(3, 3)));
    CHECK_THROWS_AS(loo_linear_closed_form(d, spec), Error);
    const VectorXd loo = loo_linear_refit(d, spec);
    // Row 0 by hand: MAP without that row.
    const ResolvedPrior prior = resolve_prior(spec.prior, d.x);
    const FitResult fit = map_linear(d.x.bottomRows(19), d.y.tail(19), prior, 1.0);
    CHECK(loo[0] == doctest::Approx(d.x.row(0).dot(fit.beta)).epsilon(1e-7));
  }
}

TEST_CASE("fold assignment") {
  Rng rng(24);
  const VectorXd y = normal_vector(rng, 53);
  const auto a = assign_folds(y, 10, 5, false);
  CHECK(a == assign_folds(y, 10, 5, false));
  CHECK(a != assign_folds(y, 10, 6, false));
  std::map<int, int> sizes;
  for (int f : a) ++sizes[f];
  CHECK(sizes.size() == 10);
  int lo = 1000, hi = 0;
  for (auto [f, s] : sizes) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  CHECK(hi - lo <= 1);

  CHECK_THROWS_AS(assign_folds(y, 1, 0, false), Error);
  CHECK_THROWS_AS(assign_folds(y, 54, 0, false), Error);

  // A lone positive always leaves one training fold single-class.
  VectorXd lone = VectorXd::Zero(20);
  lone[3] = 1.0;
  try {
    assign_folds(lone, 2, 0, true);
    FAIL("expected a fold error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("seed") != std::string::npos);
  }
}

TEST_CASE("K-fold logistic") {
  Rng rng(25);
  const Dataset d = logistic_data(rng, 20, 3);
  const CandidateSpec spec{Family::logistic, PriorSpec::iso_normal_logistic(1.0), 1.0, "lam"};

  const VectorXd a = kfold_logistic(d, spec, 5, 9);
  CHECK(a == kfold_logistic(d, spec, 5, 9));
  CHECK(a.minCoeff() > 0.0);
  CHECK(a.maxCoeff() < 1.0);

  // n folds is leave-one-out; compare with direct refits from scratch.
  const VectorXd kf = kfold_logistic(d, spec, 20, 1);
  const ResolvedPrior prior = resolve_prior(spec.prior, d.x);
  for (Index i = 0; i < d.rows(); ++i) {
    std::vector<Index> keep;
    for (Index r = 0; r < d.rows(); ++r)
      if (r != i) keep.push_back(r);
    const Dataset sub = d.subset(keep);
    const FitResult fit = map_logistic(sub.x, sub.y, prior);
    CHECK(kf[i] == doctest::Approx(expit(d.x.row(i).dot(fit.beta))).epsilon(1e-8));
  }
}

TEST_CASE("prediction matrix and residuals") {
  Rng rng(26);
  const Dataset d = linear_data(rng, 30, 4);
  const std::vector<CandidateSpec> specs{linear_spec(PriorSpec::g_prior(1.0), 1.0, "g=1"),
                                         linear_spec(PriorSpec::g_prior(10.0), 1.0, "g=10")};
  const CvPredictionMatrix m = cv_predictions(d, specs, CvScheme::loo_closed_form());
  CHECK(m.values.rows() == 30);
  CHECK(m.values.cols() == 2);
  CHECK(m.labels == std::vector<std::string>{"g=1", "g=10"});
  CHECK(m.values.col(1) == loo_linear_closed_form(d, specs[1]));

  const ResidualMatrix e = residuals(d.y, m);
  CHECK(e.values.col(0).squaredNorm() == doctest::Approx((d.y - m.values.col(0)).squaredNorm()).epsilon(1e-15));
  // Subtracting then adding back can move the last bit; bound it by one ulp
  // of the larger operand.
  for (Index k = 0; k < 2; ++k) {
    for (Index i = 0; i < 30; ++i) {
      const double back = e.values(i, k) + m.values(i, k);
      const double scale = std::max({std::abs(d.y[i]), std::abs(m.values(i, k)), std::abs(e.values(i, k))});
      CHECK(std::abs(back - d.y[i]) <= 2.0 * std::numeric_limits<double>::epsilon() * scale);
    }
  }

  CvPredictionMatrix same;
  same.values = d.y.replicate(1, 3);
  CHECK(residuals(d.y, same).values.cwiseAbs().maxCoeff() == 0.0);

  CvPredictionMatrix half;
  half.values = VectorXd{{0.5, 0.5}};
  const ResidualMatrix r = residuals(VectorXd{{1.0, 0.0}}, half);
  CHECK(r.values(0, 0) == 0.5);
  CHECK(r.values(1, 0) == -0.5);

  CHECK_THROWS_AS(residuals(VectorXd::Zero(3), half), Error);

  // K-fold schemes share one fold assignment across candidates.
  const CvPredictionMatrix kf = cv_predictions(d, specs, CvScheme::kfold(5, 3));
  const auto folds = assign_folds(d.y, 5, 3, false);
  CHECK(kf.values.col(0) == kfold_predictions(d, specs[0], folds, 5));
  CHECK(kf.values.col(1) == kfold_predictions(d, specs[1], folds, 5));
}
