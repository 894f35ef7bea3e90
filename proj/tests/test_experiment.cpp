#include "stackcast/error.hpp"
#include "stackcast/report.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <vector>

using namespace stackcast;

namespace {

ExperimentConfig small_linear() {
  ExperimentConfig c = ExperimentConfig::defaults(Family::linear);
  c.n_values = {30};
  c.r2_grid = {0.3};
  c.replications = 12;
  c.q = 50;
  c.p_fit = 5;
  c.test_size = 40;
  c.grid.count = 5;
  c.parallelism = 1;
  return c;
}

ExperimentRow row(int n, double r2, double ratio, std::string prior = "g") {
  ExperimentRow r;
  r.prior_family = std::move(prior);
  r.n = n;
  r.r2 = r2;
  r.replications = 10;
  r.mean_best_loss = 2.0;
  r.mean_stacked_loss = 2.0 * ratio;
  r.ratio = ratio;
  r.mc_se = 0.01;
  return r;
}

// Tags open and close in order; enough to catch malformed output.
bool balanced_xml(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string::npos) {
    const std::size_t end = text.find('>', pos);
    if (end == std::string::npos) return false;
    const std::string tag = text.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (tag.back() == '/') continue;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    stack.push_back(tag.substr(0, tag.find(' ')));
  }
  return stack.empty();
}

std::vector<std::pair<double, double>> polyline_points(const std::string& svg) {
  std::vector<std::pair<double, double>> out;
  const std::regex poly(R"re(<polyline[^>]*points="([^"]*)")re");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), poly); it != std::sregex_iterator(); ++it) {
    std::istringstream in((*it)[1].str());
    std::string pair;
    while (in >> pair) {
      const auto comma = pair.find(',');
      out.emplace_back(std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1)));
    }
  }
  return out;
}

double reference_y(const std::string& svg) {
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, std::regex(R"re(<line class="reference"[^>]*y1="([^"]*)")re")));
  return std::stod(m[1].str());
}

}  // namespace

TEST_CASE("grids and candidates") {
  const auto lin = spaced_grid(1e-2, 1e3, 20, GridSpacing::linear);
  CHECK(lin.size() == 20);
  CHECK(lin.front() == 1e-2);
  CHECK(lin.back() == 1e3);
  CHECK(lin[1] - lin[0] == doctest::Approx(lin[19] - lin[18]));
  const auto lg = spaced_grid(1e-3, 10.0, 5, GridSpacing::log);
  CHECK(lg[2] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(spaced_grid(0.0, 1.0, 3, GridSpacing::log), Error);

  CandidateGrid g;
  g.count = 4;
  const MatrixXd x = MatrixXd::Identity(6, 3) + MatrixXd::Constant(6, 3, 0.1);
  const auto specs = build_candidates(g, Family::linear, x, 1.0, 0.5);
  CHECK(specs.size() == 4);
  CHECK(specs.front().label == "g=0.01");

  CandidateGrid t;
  t.prior = PriorFamily::t;
  t.nu_values = {1, 2, 30};
  t.t_lambda = 2.5;
  t.t_lambda_by_r2 = {{0.2, 0.2}};
  CHECK(t.t_lambda_for(0.2) == 0.2);
  CHECK(t.t_lambda_for(0.5) == 2.5);
  const auto ts = build_candidates(t, Family::logistic, x, 1.0, 0.2);
  CHECK(ts.size() == 3);
  const auto& mt = std::get<MultiT>(ts[0].prior.variant());
  CHECK(mt.scale(0, 0) == doctest::Approx(0.2));
  CHECK(ts[2].label == "nu=30");

  CandidateGrid fixed;
  fixed.explicit_values = {0.5, 2.0};
  CHECK(build_candidates(fixed, Family::linear, x, 1.0, 0.5).size() == 2);

  CHECK(default_scheme(Family::logistic, PriorFamily::lambda, 10, 1).kind == CvKind::kfold);
  CHECK(default_scheme(Family::linear, PriorFamily::t, 10, 1).kind == CvKind::loo_refit);
  CHECK(default_scheme(Family::linear, PriorFamily::g, 10, 1).kind == CvKind::loo_closed_form);
}

TEST_CASE("configuration") {
  ExperimentConfig c = ExperimentConfig::defaults(Family::logistic);
  CHECK(c.r2_grid.size() == 6);
  CHECK(c.grid.prior == PriorFamily::lambda);
  CHECK(c.grid.min == 1e-3);
  CHECK(c.grid.max == 10.0);
  CHECK_NOTHROW(c.validate());

  apply_config_json(c, R"({"replications": 7, "r2_grid": [0.2], "prior": "t", "t_lambda_by_r2": {"0.2": 0.3}})");
  CHECK(c.replications == 7);
  CHECK(c.grid.prior == PriorFamily::t);
  CHECK(c.grid.t_lambda_for(0.2) == 0.3);

  CHECK_THROWS_AS(apply_config_json(c, R"({"replicatons": 7})"), Error);
  CHECK_THROWS_AS(apply_config_json(c, R"({"replications": "many"})"), Error);
  CHECK_THROWS_AS(apply_config_json(c, "[1, 2]"), Error);
  CHECK_THROWS_AS(apply_config_json(c, "{"), Error);

  ExperimentConfig bad = ExperimentConfig::defaults(Family::linear);
  bad.replications = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = ExperimentConfig::defaults(Family::linear);
  bad.r2_grid.clear();
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = ExperimentConfig::defaults(Family::linear);
  bad.grid.prior = PriorFamily::lambda;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = ExperimentConfig::defaults(Family::linear);
  bad.grid.prior = PriorFamily::t;
  bad.grid.nu_values.clear();
  CHECK_THROWS_AS(bad.validate(), Error);

  const auto path = std::filesystem::temp_directory_path() / "stackcast_config.json";
  std::ofstream(path) << R"({"family": "logistic", "folds": 5})";
  const ExperimentConfig loaded = load_config(path, Family::linear);
  CHECK(loaded.family == Family::logistic);
  CHECK(loaded.folds == 5);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json", Family::linear), Error);
}

TEST_CASE("single candidate run gives ratio one") {
  ExperimentConfig c = small_linear();
  c.replications = 1;
  c.grid.count = 1;
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].ratio == 1.0);
  CHECK(r.rows[0].mc_se == 0.0);
  CHECK(r.rows[0].oracle_holds == 1);
}

TEST_CASE("experiment rows") {
  ExperimentConfig c = small_linear();
  c.n_values = {30, 40};
  c.r2_grid = {0.2, 0.6};
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.rows.size() == 4);
  for (const auto& row : r.rows) {
    CHECK(row.replications == 12);
    CHECK(row.failed == 0);
    CHECK(row.oracle_holds == 12);
    CHECK(std::abs(row.ratio * row.mean_best_loss - row.mean_stacked_loss) <= 1e-12 * row.mean_stacked_loss);
    CHECK(row.wall_seconds == 0.0);
  }
  CHECK(r.rows[1].n == 30);
  CHECK(r.rows[1].r2 == 0.6);

  c.record_timing = true;
  c.n_values = {30};
  c.r2_grid = {0.2};
  CHECK(run_experiment(c).rows[0].wall_seconds > 0.0);
}

TEST_CASE("results do not depend on the thread count") {
  ExperimentConfig c = small_linear();
  c.replications = 20;
  const std::string one = result_to_csv(run_experiment(c));
  c.parallelism = 8;
  CHECK(result_to_csv(run_experiment(c)) == one);

  ExperimentConfig lg = ExperimentConfig::defaults(Family::logistic);
  lg.n_values = {40};
  lg.r2_grid = {0.5};
  lg.replications = 6;
  lg.q = 50;
  lg.p_fit = 4;
  lg.test_size = 30;
  lg.grid.count = 4;
  lg.folds = 5;
  lg.parallelism = 1;
  const std::string a = result_to_csv(run_experiment(lg));
  lg.parallelism = 3;
  CHECK(result_to_csv(run_experiment(lg)) == a);
}

TEST_CASE("failing cells are reported") {
  ExperimentConfig c = small_linear();
  c.n_values = {4};  // fewer rows than fitted covariates: X'X is singular
  c.replications = 3;
  try {
    run_experiment(c);
    FAIL("expected a cell failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("3 of 3") != std::string::npos);
  }
}

TEST_CASE("csv output") {
  ExperimentResult empty;
  CHECK(result_to_csv(empty) == std::string(kResultCsvHeader) + "\n");

  ExperimentResult one;
  one.rows.push_back(row(50, 0.2, 0.91234567891234));
  const std::string text = result_to_csv(one);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.find("0.9123456789,") != std::string::npos);
  CHECK(result_to_csv(result_from_csv(text)) == text);

  ExperimentResult many;
  for (double r2 : {0.2, 0.35, 0.5}) many.rows.push_back(row(100, r2, 1.0 / 3.0 + r2));
  const std::string m = result_to_csv(many);
  CHECK(result_to_csv(result_from_csv(m)) == m);

  CHECK_THROWS_AS(result_from_csv("a,b\n"), Error);
  CHECK_THROWS_AS(result_from_csv(std::string(kResultCsvHeader) + "\nlinear,g,1\n"), Error);

  const auto path = std::filesystem::temp_directory_path() / "stackcast_result.csv";
  emit_csv(one, path);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str() == text);
  try {
    emit_csv(one, "/nonexistent/dir/out.csv");
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
    CHECK(std::string(e.what()).find("/nonexistent/dir/out.csv") != std::string::npos);
  }
}

TEST_CASE("svg output") {
  ExperimentResult single;
  single.rows.push_back(row(50, 0.5, 0.9));
  const std::string s = result_to_svg(single);
  CHECK(balanced_xml(s));
  CHECK(s.rfind("<?xml", 0) == 0);
  std::size_t markers = 0;
  for (std::size_t p = s.find("class=\"marker\""); p != std::string::npos; p = s.find("class=\"marker\"", p + 1))
    ++markers;
  CHECK(markers == 1);

  ExperimentResult two;
  for (int n : {100, 50})
    for (double r2 : {0.2, 0.5, 0.8}) two.rows.push_back(row(n, r2, 0.7 + 0.3 * r2 - 0.001 * n));
  const std::string t = result_to_svg(two);
  CHECK(balanced_xml(t));
  CHECK(std::regex_search(t, std::regex(R"(class="series solid" data-n="50")")));
  CHECK(std::regex_search(t, std::regex(R"(class="series dashed" data-n="100")")));
  CHECK(std::count(t.begin(), t.end(), '\n') > 10);
  const std::string solid = "series solid";
  CHECK(t.find(solid) == t.rfind(solid));
  const std::string dashed = "series dashed";
  CHECK(t.find(dashed) == t.rfind(dashed));

  // Ratios below one plot below the reference line (SVG y grows downwards).
  const double ref = reference_y(t);
  const auto points = polyline_points(t);
  CHECK(points.size() == 6);
  for (const auto& [x, y] : points) CHECK(y > ref);

  ExperimentResult panels;
  panels.rows.push_back(row(50, 0.5, 0.9, "g"));
  panels.rows.push_back(row(50, 0.5, 0.95, "t"));
  const std::string p = result_to_svg(panels);
  std::size_t count = 0;
  for (std::size_t i = p.find("class=\"panel\""); i != std::string::npos; i = p.find("class=\"panel\"", i + 1)) ++count;
  CHECK(count == 2);

  CHECK_THROWS_AS(result_to_svg(ExperimentResult{}), Error);
}
