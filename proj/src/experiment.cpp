#include "stackcast/experiment.hpp"

#include "stackcast/dgp.hpp"
#include "stackcast/error.hpp"
#include "stackcast/rng.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace stackcast {

const char* to_string(PriorFamily prior) noexcept {
  switch (prior) {
    case PriorFamily::g: return "g";
    case PriorFamily::gamma: return "gamma";
    case PriorFamily::lambda: return "lambda";
    case PriorFamily::t: return "t";
  }
  return "unknown";
}

PriorFamily prior_family_from_string(std::string_view name) {
  if (name == "g") return PriorFamily::g;
  if (name == "gamma" || name == "iso") return PriorFamily::gamma;
  if (name == "lambda") return PriorFamily::lambda;
  if (name == "t") return PriorFamily::t;
  fail(ErrorCode::invalid_argument, "unknown prior family '" + std::string(name) + "'");
}

std::vector<double> spaced_grid(double lo, double hi, int count, GridSpacing spacing) {
  require(count >= 1, "grid needs at least one point");
  require(lo > 0.0 && hi >= lo, "grid bounds must satisfy 0 < min <= max");
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < count; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(count - 1);
    out[static_cast<std::size_t>(i)] = spacing == GridSpacing::linear
                                           ? lo + frac * (hi - lo)
                                           : std::exp(std::log(lo) + frac * (std::log(hi) - std::log(lo)));
  }
  out.back() = hi;
  return out;
}

std::vector<double> CandidateGrid::values() const {
  if (!explicit_values.empty()) return explicit_values;
  if (prior == PriorFamily::t) return nu_values;
  return spaced_grid(min, max, count, spacing);
}

double CandidateGrid::t_lambda_for(double r2) const {
  for (const auto& [key, value] : t_lambda_by_r2) {
    if (std::abs(key - r2) < 1e-9) return value;
  }
  return t_lambda;
}

namespace {

std::string format_label(const char* name, double value) {
  std::ostringstream out;
  out.precision(6);
  out << name << "=" << value;
  return out.str();
}

}  // namespace

std::vector<CandidateSpec> build_candidates(const CandidateGrid& grid, Family family, const MatrixXd& x_train,
                                            double sigma2, double r2) {
  std::vector<CandidateSpec> specs;
  const auto values = grid.values();
  require(!values.empty(), "candidate grid is empty");
  switch (grid.prior) {
    case PriorFamily::g:
      require(family == Family::linear, "g-prior grids apply to linear stacks");
      for (double g : values) specs.push_back({family, PriorSpec::g_prior(g), sigma2, format_label("g", g)});
      break;
    case PriorFamily::gamma:
      require(family == Family::linear, "gamma grids apply to linear stacks; use lambda for logistic");
      for (double g2 : values) specs.push_back({family, PriorSpec::isotropic_normal(g2), sigma2, format_label("gamma2", g2)});
      break;
    case PriorFamily::lambda:
      if (family == Family::linear) {
        for (double l : values) specs.push_back({family, PriorSpec::isotropic_normal(l), sigma2, format_label("lambda", l)});
      } else {
        for (double l : values) specs.push_back({family, PriorSpec::iso_normal_logistic(l), sigma2, format_label("lambda", l)});
      }
      break;
    case PriorFamily::t: {
      const double lambda = grid.t_lambda_for(r2);
      const Index p = x_train.cols();
      MatrixXd scale;
      if (family == Family::linear) {
        const MatrixXd xtx = x_train.transpose() * x_train;
        Eigen::LLT<MatrixXd> llt(xtx);
        if (llt.info() != Eigen::Success) fail(ErrorCode::numerical, "T-prior scale needs a full-rank design");
        scale = lambda * llt.solve(MatrixXd::Identity(p, p));
        scale = 0.5 * (scale + scale.transpose()).eval();
      } else {
        scale = lambda * MatrixXd::Identity(p, p);
      }
      for (double nu : values) specs.push_back({family, PriorSpec::multi_t(nu, scale), sigma2, format_label("nu", nu)});
      break;
    }
  }
  return specs;
}

CvScheme default_scheme(Family family, PriorFamily prior, int folds, std::uint64_t seed) {
  if (family == Family::logistic) return CvScheme::kfold(folds, seed);
  return prior == PriorFamily::t ? CvScheme::loo_refit() : CvScheme::loo_closed_form();
}

// ---- configuration ----------------------------------------------------------

ExperimentConfig ExperimentConfig::defaults(Family family) {
  ExperimentConfig c;
  c.family = family;
  c.n_values = {50, 100};
  if (family == Family::linear) {
    c.r2_grid = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    c.grid.prior = PriorFamily::g;
    c.grid.min = 1e-2;
    c.grid.max = 1e3;
    c.grid.nu_values = {1, 2, 3, 4, 5, 10, 30};
    c.grid.t_lambda = 2.5;
  } else {
    c.r2_grid = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
    c.grid.prior = PriorFamily::lambda;
    c.grid.min = 1e-3;
    c.grid.max = 10.0;
    for (int nu = 1; nu <= 30; ++nu) c.grid.nu_values.push_back(nu);
    c.grid.t_lambda = 0.1;
    const double r2s[] = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    const double lambdas[] = {0.2, 0.2, 0.2, 0.1, 0.1, 0.1, 0.1};
    for (int i = 0; i < 7; ++i) c.grid.t_lambda_by_r2[r2s[i]] = lambdas[i];
  }
  c.grid.count = 20;
  c.grid.spacing = GridSpacing::linear;
  return c;
}

void ExperimentConfig::validate() const {
  require(!n_values.empty(), "n_values must not be empty");
  require(!r2_grid.empty(), "r2_grid must not be empty");
  for (int n : n_values) require(n >= 2, "every n must be >= 2");
  for (double r2 : r2_grid) require(r2 > 0.0 && r2 < 1.0, "every r2 must lie in (0, 1)");
  require(replications >= 1, "replications must be >= 1");
  require(test_size >= 1, "test_size must be >= 1");
  require(q >= 1 && p_fit >= 1 && p_fit <= q, "need 1 <= p_fit <= q");
  require(sigma2 > 0.0, "sigma2 must be positive");
  require(parallelism >= 0, "parallelism must be >= 0");
  if (grid.prior == PriorFamily::t) {
    require(!grid.nu_values.empty(), "nu_values must not be empty for T grids");
    for (double nu : grid.nu_values) require(nu > 0.0, "every nu must be positive");
    require(grid.t_lambda > 0.0, "t_lambda must be positive");
    for (const auto& [r2, l] : grid.t_lambda_by_r2) require(l > 0.0, "t_lambda_by_r2 values must be positive");
  } else {
    require(grid.count >= 1 && grid.min > 0.0 && grid.max >= grid.min, "grid needs count >= 1 and 0 < min <= max");
  }
  if (family == Family::linear) {
    require(grid.prior != PriorFamily::lambda, "lambda grids belong to logistic stacks; use gamma for linear");
  } else {
    require(grid.prior == PriorFamily::lambda || grid.prior == PriorFamily::t,
            "logistic stacks use lambda or t grids");
    for (int n : n_values) require(folds >= 2 && folds <= n, "folds must lie in [2, n]");
  }
}

int ExperimentConfig::resolved_parallelism() const {
  if (parallelism > 0) return parallelism;
  if (const char* env = std::getenv("STACKCAST_THREADS")) {
    const int value = std::atoi(env);
    if (value > 0) return value;
  }
  return 1;
}

void apply_config_json(ExperimentConfig& config, std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("config is not valid JSON: ") + e.what());
  }
  require(doc.is_object(), "config must be a JSON object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "family") config.family = family_from_string(value.get<std::string>());
      else if (key == "n_values") config.n_values = value.get<std::vector<int>>();
      else if (key == "r2_grid") config.r2_grid = value.get<std::vector<double>>();
      else if (key == "replications") config.replications = value.get<int>();
      else if (key == "prior") config.grid.prior = prior_family_from_string(value.get<std::string>());
      else if (key == "grid_min") config.grid.min = value.get<double>();
      else if (key == "grid_max") config.grid.max = value.get<double>();
      else if (key == "grid_count") config.grid.count = value.get<int>();
      else if (key == "grid_spacing") {
        const auto s = value.get<std::string>();
        require(s == "linear" || s == "log", "grid_spacing must be 'linear' or 'log'");
        config.grid.spacing = s == "log" ? GridSpacing::log : GridSpacing::linear;
      }
      else if (key == "nu_values") config.grid.nu_values = value.get<std::vector<double>>();
      else if (key == "t_lambda") config.grid.t_lambda = value.get<double>();
      else if (key == "t_lambda_by_r2") {
        config.grid.t_lambda_by_r2.clear();
        for (const auto& [r2, l] : value.items()) config.grid.t_lambda_by_r2[std::stod(r2)] = l.get<double>();
      }
      else if (key == "folds") config.folds = value.get<int>();
      else if (key == "test_size") config.test_size = value.get<int>();
      else if (key == "base_seed") config.base_seed = value.get<std::uint64_t>();
      else if (key == "parallelism") config.parallelism = value.get<int>();
      else if (key == "q") config.q = value.get<int>();
      else if (key == "p_fit") config.p_fit = value.get<int>();
      else if (key == "sigma2") config.sigma2 = value.get<double>();
      else if (key == "record_timing") config.record_timing = value.get<bool>();
      else fail(ErrorCode::invalid_argument, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("config value has the wrong type: ") + e.what());
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::parse, "t_lambda_by_r2 keys must be numbers");
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, Family fallback) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open config '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  Family family = fallback;
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.is_object() && doc.contains("family")) family = family_from_string(doc.at("family").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, path.string() + ": " + e.what());
  }
  ExperimentConfig config = ExperimentConfig::defaults(family);
  apply_config_json(config, text);
  return config;
}

// ---- running -----------------------------------------------------------------

std::uint64_t replication_seed(std::uint64_t base_seed, int n, double r2, int rep) {
  const auto r2_key = static_cast<std::uint64_t>(std::llround(r2 * 1e9));
  return derive_seed(base_seed, static_cast<std::uint64_t>(n), r2_key, static_cast<std::uint64_t>(rep));
}

ReplicationOutcome run_replication(const ExperimentConfig& config, int n, double r2, std::uint64_t seed) {
  ReplicationOutcome out;
  try {
    DgpConfig dgp;
    dgp.family = config.family;
    dgp.n = n;
    dgp.q = config.q;
    dgp.p_fit = config.p_fit;
    dgp.r2 = r2;
    dgp.sigma2 = config.sigma2;
    dgp.seed = seed;
    const GeneratedData data = generate(dgp, config.test_size);

    auto specs = build_candidates(config.grid, config.family, data.train.x, config.sigma2, r2);
    const CvScheme scheme = default_scheme(config.family, config.grid.prior, config.folds, derive_seed(seed, 2));
    const StackModel model = fit_stack(data.train, std::move(specs), scheme);

    const Dataset& test = *data.test;
    const VectorXd stacked = predict(model, test.x);
    const VectorXd best = predict_candidate(model, model.best_index, test.x);
    out.stacked_loss = squared_error(*test.truth, stacked);
    out.best_loss = squared_error(*test.truth, best);
    out.stacked_cv = model.stacked_cv_error();
    out.best_cv = model.cv_errors[model.best_index];
    out.cv_trace = model.cv_errors.sum();
    out.oracle_holds = out.stacked_cv <= out.best_cv + 1e-9 * (1.0 + out.cv_trace);
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const int threads = std::max(1, std::min(config.resolved_parallelism(), config.replications));
  ExperimentResult result;

  for (int n : config.n_values) {
    for (double r2 : config.r2_grid) {
      const auto start = std::chrono::steady_clock::now();
      std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(config.replications));
      std::atomic<int> next{0};
      auto worker = [&] {
        for (int rep = next.fetch_add(1); rep < config.replications; rep = next.fetch_add(1)) {
          outcomes[static_cast<std::size_t>(rep)] =
              run_replication(config, n, r2, replication_seed(config.base_seed, n, r2, rep));
        }
      };
      if (threads == 1) {
        worker();
      } else {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
      }

      ExperimentRow row;
      row.family = config.family;
      row.prior_family = to_string(config.grid.prior);
      row.n = n;
      row.r2 = r2;
      RatioAccumulator acc;
      for (std::size_t rep = 0; rep < outcomes.size(); ++rep) {
        const auto& o = outcomes[rep];
        if (!o.ok) {
          ++row.failed;
          if (row.errors.size() < 10) row.errors.push_back("replication " + std::to_string(rep) + ": " + o.error);
          continue;
        }
        acc.add(o.stacked_loss, o.best_loss);
        if (o.oracle_holds) ++row.oracle_holds;
      }
      if (row.failed * 100 > config.replications) {
        std::string message = "cell n=" + std::to_string(n) + " r2=" + std::to_string(r2) + ": " +
                              std::to_string(row.failed) + " of " + std::to_string(config.replications) +
                              " replications failed";
        if (!row.errors.empty()) message += "; first: " + row.errors.front();
        fail(ErrorCode::numerical, message);
      }
      row.replications = static_cast<int>(acc.count());
      row.mean_stacked_loss = acc.mean_stacked();
      row.mean_best_loss = acc.mean_best();
      row.ratio = acc.ratio();
      row.mc_se = acc.standard_error();
      if (config.record_timing) {
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

}  // namespace stackcast
