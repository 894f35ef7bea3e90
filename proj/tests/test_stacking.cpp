#include "stackcast/dgp.hpp"
#include "stackcast/error.hpp"
#include "stackcast/stacking.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace stackcast;
using testing::normal_matrix;
using testing::normal_vector;

namespace {

std::vector<CandidateSpec> g_grid(int count, double lo = 1e-2, double hi = 1e3) {
  std::vector<CandidateSpec> specs;
  for (int i = 0; i < count; ++i) {
    const double g = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    specs.push_back({Family::linear, PriorSpec::g_prior(g), 1.0, "g" + std::to_string(i)});
  }
  return specs;
}

Dataset simulated(Family family, double r2, std::uint64_t seed) {
  DgpConfig config;
  config.family = family;
  config.r2 = r2;
  config.seed = seed;
  config.q = 200;
  return generate(config).train;
}

}  // namespace

TEST_CASE("single candidate stack") {
  const Dataset d = simulated(Family::linear, 0.5, 1);
  const StackModel m = fit_stack(d, g_grid(1), CvScheme::loo_closed_form());
  CHECK(m.weights.w == VectorXd::Ones(1));
  CHECK(m.best_index == 0);
  CHECK(predict(m, d.x) == predict_candidate(m, 0, d.x));
  CHECK(m.stacked_cv_error() == doctest::Approx(m.cv_errors[0]).epsilon(1e-15));
}

TEST_CASE("identical candidates") {
  const Dataset d = simulated(Family::linear, 0.5, 2);
  std::vector<CandidateSpec> specs = g_grid(1);
  specs.push_back(specs.front());
  specs.back().label = "copy";
  const StackModel m = fit_stack(d, specs, CvScheme::loo_closed_form());
  CHECK(std::abs(m.weights.w.sum() - 1.0) <= 1e-10);
  CHECK(predict(m, d.x) == predict_candidate(m, 1, d.x));
  CHECK(m.best_index == 0);
}

TEST_CASE("stacked CV criterion never exceeds the best candidate's") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset d = simulated(Family::linear, 0.5, seed);
    const StackModel m = fit_stack(d, g_grid(20), CvScheme::loo_closed_form());
    const double slack = 1e-9 * (1.0 + m.cv_errors.sum());
    CHECK(m.stacked_cv_error() <= m.cv_errors.minCoeff() + slack);
    CHECK(m.best_index == argmin_lowest(m.cv_errors));
    CHECK(m.weights.w.minCoeff() >= 0.0);
    CHECK(std::abs(m.weights.w.sum() - 1.0) <= 1e-10);
  }
  // Logistic stacks through K-fold CV.
  const Dataset d = simulated(Family::logistic, 0.5, 3);
  std::vector<CandidateSpec> specs;
  for (double lambda : {0.001, 0.1, 1.0, 10.0}) {
    specs.push_back({Family::logistic, PriorSpec::iso_normal_logistic(lambda), 1.0, "l"});
  }
  const StackModel m = fit_stack(d, specs, CvScheme::kfold(10, 4));
  CHECK(m.stacked_cv_error() <= m.cv_errors.minCoeff() + 1e-9 * (1.0 + m.cv_errors.sum()));
  Rng rng(5);
  const VectorXd p = predict(m, 3.0 * normal_matrix(rng, 100, 14));
  CHECK(p.minCoeff() > 0.0);
  CHECK(p.maxCoeff() < 1.0);

  CHECK_THROWS_AS(fit_stack(d, specs, CvScheme::loo_closed_form()), Error);
  CHECK_THROWS_AS(fit_stack(d, g_grid(2), CvScheme::kfold(10, 4)), Error);
}

TEST_CASE("prediction arithmetic") {
  Rng rng(6);
  StackModel m;
  m.family = Family::linear;
  m.specs = g_grid(2);
  m.fits.resize(2);
  m.fits[0].beta = VectorXd::Zero(3);
  m.fits[1].beta = normal_vector(rng, 3);
  const MatrixXd x = normal_matrix(rng, 10, 3);

  m.weights.w = VectorXd{{0.5, 0.5}};
  CHECK(predict(m, x) == 0.5 * (x * m.fits[1].beta));

  m.weights.w = VectorXd{{0.0, 1.0}};
  CHECK(predict(m, x) == predict_candidate(m, 1, x));
  m.fits[0].beta = normal_vector(rng, 3);
  m.weights.w = VectorXd{{1.0, 0.0}};
  CHECK(predict(m, x) == predict_candidate(m, 0, x));

  CHECK_THROWS_AS(predict(m, normal_matrix(rng, 4, 2)), Error);
}

TEST_CASE("argmin ties") {
  CHECK(argmin_lowest(VectorXd{{3.0, 1.0, 1.0, 2.0}}) == 1);
  CHECK(argmin_lowest(VectorXd{{0.0, 0.0}}) == 0);
  CHECK(argmin_lowest(VectorXd{{5.0}}) == 0);
}

TEST_CASE("ratio of means") {
  RatioAccumulator acc;
  acc.add(1.0, 2.0);
  acc.add(3.0, 2.0);
  CHECK(acc.ratio() == 1.0);

  Rng rng(7);
  const VectorXd truth = normal_vector(rng, 20);
  const VectorXd guess = truth + normal_vector(rng, 20);
  RatioAccumulator same, perfect, logistic;
  CHECK(ratio_linear(truth, guess, guess, same) == 1.0);
  CHECK(ratio_linear(truth, truth, guess, perfect) == 0.0);
  CHECK(ratio_logistic(truth, guess, guess, logistic) == 1.0);

  RatioAccumulator zero;
  zero.add(1.0, 0.0);
  CHECK_THROWS_AS(zero.ratio(), Error);
  CHECK(zero.standard_error() == 0.0);
}

TEST_CASE("delta-method standard error") {
  // Independent evaluation of the ratio's delta-method variance with
  // covariances from centred cross products.
  Rng rng(8);
  RatioAccumulator acc;
  std::vector<double> a, b;
  for (int i = 0; i < 300; ++i) {
    const double best = 2.0 + std::abs(rng.normal());
    const double stacked = 0.8 * best + 0.3 * rng.normal();
    a.push_back(stacked);
    b.push_back(best);
    acc.add(stacked, best);
  }
  const Eigen::Map<const VectorXd> va(a.data(), 300), vb(b.data(), 300);
  const double ma = va.mean(), mb = vb.mean();
  const VectorXd ca = va.array() - ma, cb = vb.array() - mb;
  const double saa = ca.squaredNorm() / 299, sbb = cb.squaredNorm() / 299, sab = ca.dot(cb) / 299;
  const double r = ma / mb;
  // Gradient of a/b is (1/b, -a/b^2).
  const double g1 = 1.0 / mb, g2 = -ma / (mb * mb);
  const double se = std::sqrt((g1 * g1 * saa + 2 * g1 * g2 * sab + g2 * g2 * sbb) / 300);
  CHECK(acc.ratio() == doctest::Approx(r).epsilon(1e-14));
  CHECK(acc.standard_error() == doctest::Approx(se).epsilon(1e-10));
  CHECK(acc.count() == 300);
}

TEST_CASE("model serialization") {
  const Dataset d = simulated(Family::linear, 0.3, 9);
  std::vector<CandidateSpec> specs = g_grid(3);
  specs.push_back({Family::linear, PriorSpec::isotropic_normal(0.5), 1.0, "iso"});
  specs.push_back({Family::linear, PriorSpec::multi_t(3.0, 2.5 * (d.x.transpose() * d.x).inverse()), 1.0, "t"});
  const StackModel m = fit_stack(d, specs, CvScheme::loo_refit());

  const std::string text = model_to_json(m);
  const StackModel back = model_from_json(text);
  CHECK(model_to_json(back) == text);
  CHECK(predict(back, d.x) == predict(m, d.x));
  CHECK(back.best_index == m.best_index);
  CHECK(back.covariate_names == m.covariate_names);

  const auto path = std::filesystem::temp_directory_path() / "stackcast_model.json";
  save_model(m, path);
  CHECK(model_to_json(load_model(path)) == text);

  CHECK_THROWS_AS(model_from_json("{}"), Error);
  CHECK_THROWS_AS(model_from_json("not json"), Error);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), Error);
}

TEST_CASE("errors carry the candidate label") {
  Dataset d;
  d.x = MatrixXd{{1, 2}, {2, 4}, {3, 6}, {4, 8}};
  d.y = VectorXd{{1, 2, 3, 4}};
  std::vector<CandidateSpec> specs{{Family::linear, PriorSpec::g_prior(1.0), 1.0, "collinear-g"}};
  try {
    fit_stack(d, specs, CvScheme::loo_closed_form());
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("collinear-g") != std::string::npos);
    CHECK(msg.find("collinear-g", msg.find("collinear-g") + 1) == std::string::npos);
  }
}
