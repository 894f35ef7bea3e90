// Command-line front end. Talks to the library only through the C interface.

#include "stackcast/stackcast.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerification = 3;

struct Failure {
  int exit_code;
  std::string message;
};

void check(sc_status status, const std::string& what) {
  if (status == SC_OK) return;
  const int code = status == SC_ERR_VERIFICATION ? kExitVerification
                   : status == SC_ERR_INVALID_ARGUMENT && what == "config" ? kExitUsage
                                                                             : kExitRuntime;
  throw Failure{code, what + ": " + sc_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using DatasetPtr = std::unique_ptr<sc_dataset, Deleter<sc_dataset, sc_dataset_free>>;
using ModelPtr = std::unique_ptr<sc_stack_model, Deleter<sc_stack_model, sc_stack_model_free>>;
using ConfigPtr = std::unique_ptr<sc_experiment_config, Deleter<sc_experiment_config, sc_experiment_config_free>>;
using ResultPtr = std::unique_ptr<sc_experiment_result, Deleter<sc_experiment_result, sc_experiment_result_free>>;

// "min:max:count[:log]" or "v1,v2,...".
std::vector<double> parse_grid(const std::string& spec) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw CLI::ValidationError("--grid", "bad number '" + s + "' in '" + spec + "'");
    return v;
  };
  std::vector<std::string> parts;
  const char sep = spec.find(':') != std::string::npos ? ':' : ',';
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, sep);) parts.push_back(item);
  if (parts.empty()) throw CLI::ValidationError("--grid", "empty grid");

  if (sep == ',') {
    std::vector<double> out;
    for (const auto& p : parts) out.push_back(number(p));
    return out;
  }
  if (parts.size() != 3 && parts.size() != 4) throw CLI::ValidationError("--grid", "expected min:max:count[:log]");
  const bool log_spaced = parts.size() == 4;
  if (log_spaced && parts[3] != "log") throw CLI::ValidationError("--grid", "fourth field must be 'log'");
  const double lo = number(parts[0]);
  const double hi = number(parts[1]);
  const double count_value = number(parts[2]);
  const int count = static_cast<int>(count_value);
  if (count < 1 || count != count_value) throw CLI::ValidationError("--grid", "count must be a positive integer");
  if (!(lo > 0.0) || hi < lo) throw CLI::ValidationError("--grid", "need 0 < min <= max");
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out.push_back(log_spaced ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo));
  }
  return out;
}

// ---- simulate ----------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out_csv;
  std::string out_svg;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool timing = false;
};

int run_simulate(sc_family family, const SimulateArgs& args) {
  sc_experiment_config* raw = nullptr;
  if (!args.config.empty()) {
    check(sc_experiment_config_load(args.config.c_str(), family, &raw), "config");
  } else {
    check(sc_experiment_config_default(family, &raw), "config");
  }
  ConfigPtr config(raw);
  sc_family loaded = family;
  check(sc_experiment_config_family(config.get(), &loaded), "config");
  if (loaded != family) throw Failure{kExitUsage, "config: family in file does not match the subcommand"};

  if (args.reps) check(sc_experiment_config_set(config.get(), "replications", std::to_string(*args.reps).c_str()), "config");
  if (args.seed) check(sc_experiment_config_set(config.get(), "base_seed", std::to_string(*args.seed).c_str()), "config");
  if (args.threads)
    check(sc_experiment_config_set(config.get(), "parallelism", std::to_string(*args.threads).c_str()), "config");
  if (args.timing) check(sc_experiment_config_set(config.get(), "record_timing", "true"), "config");

  sc_experiment_result* result_raw = nullptr;
  check(sc_experiment_run(config.get(), &result_raw), "simulation");
  ResultPtr result(result_raw);

  size_t rows = 0;
  check(sc_experiment_result_rows(result.get(), &rows), "result");
  bool oracle_ok = true;
  std::printf("%-6s %-8s %5s %6s %6s %10s %10s %8s\n", "prior", "family", "n", "r2", "reps", "ratio", "mc_se", "oracle");
  for (size_t i = 0; i < rows; ++i) {
    sc_result_row row{};
    check(sc_experiment_result_row(result.get(), i, &row), "result");
    std::printf("%-6s %-8s %5d %6.3f %6d %10.6f %10.6f %4d/%-4d\n", row.prior_family,
                row.family == SC_FAMILY_LINEAR ? "linear" : "logistic", row.n, row.r2, row.replications, row.ratio,
                row.mc_se, row.oracle_holds, row.replications);
    if (row.failed_replications > 0) {
      std::fprintf(stderr, "warning: %d replications failed in cell n=%d r2=%g\n", row.failed_replications, row.n,
                   row.r2);
    }
    if (row.oracle_holds != row.replications) oracle_ok = false;
  }
  if (!args.out_csv.empty()) check(sc_experiment_result_write_csv(result.get(), args.out_csv.c_str()), "csv");
  if (!args.out_svg.empty()) check(sc_experiment_result_write_svg(result.get(), args.out_svg.c_str()), "svg");
  if (!oracle_ok) {
    std::fprintf(stderr, "error: stacked CV error exceeded the best candidate's in some replication\n");
    return kExitVerification;
  }
  return kExitOk;
}

// ---- stack-fit / predict -----------------------------------------------------

struct FitArgs {
  std::string data;
  std::string outcome;
  std::string prior = "g";
  std::string grid;
  double t_lambda = 1.0;
  double sigma2 = 1.0;
  int folds = 10;
  std::uint64_t seed = 1;
  std::string out;
};

int run_fit(const FitArgs& args) {
  sc_fit_options options;
  sc_fit_options_init(&options);
  options.prior = args.prior == "g" ? SC_PRIOR_G : args.prior == "iso" ? SC_PRIOR_ISO : SC_PRIOR_T;
  const std::vector<double> grid = parse_grid(args.grid);
  options.grid = grid.data();
  options.grid_len = grid.size();
  options.t_lambda = args.t_lambda;
  options.sigma2 = args.sigma2;
  options.folds = args.folds;
  options.seed = args.seed;

  sc_dataset* data_raw = nullptr;
  check(sc_dataset_load_csv(args.data.c_str(), args.outcome.c_str(), &data_raw), "data");
  DatasetPtr data(data_raw);

  sc_stack_model* model_raw = nullptr;
  check(sc_stack_fit(data.get(), &options, &model_raw), "stack-fit");
  ModelPtr model(model_raw);

  size_t k = 0, best = 0;
  check(sc_stack_model_size(model.get(), &k), "model");
  check(sc_stack_model_best_index(model.get(), &best), "model");
  std::vector<double> weights(k), cv(k);
  check(sc_stack_model_weights(model.get(), weights.data(), k), "model");
  check(sc_stack_model_cv_errors(model.get(), cv.data(), k), "model");
  double stacked_cv = 0.0;
  check(sc_stack_model_stacked_cv_error(model.get(), &stacked_cv), "model");

  std::printf("%-24s %14s %12s\n", "candidate", "cv_error", "weight");
  double total = 0.0;
  for (size_t i = 0; i < k; ++i) {
    const char* label = nullptr;
    check(sc_stack_model_label(model.get(), i, &label), "model");
    std::printf("%-24s %14.8g %12.8f%s\n", label, cv[i], weights[i], i == best ? "  (best)" : "");
    total += weights[i];
  }
  std::printf("weight sum %.12f\n", total);
  std::printf("stacked cv_error %.8g, best cv_error %.8g\n", stacked_cv, cv[best]);

  if (!args.out.empty()) {
    check(sc_stack_model_save(model.get(), args.out.c_str()), "save");
    std::printf("model written to %s\n", args.out.c_str());
  }
  return kExitOk;
}

int run_predict(const std::string& model_path, const std::string& data_path, const std::string& out_path) {
  sc_stack_model* model_raw = nullptr;
  check(sc_stack_model_load(model_path.c_str(), &model_raw), "model");
  ModelPtr model(model_raw);
  sc_dataset* data_raw = nullptr;
  check(sc_dataset_load_csv(data_path.c_str(), nullptr, &data_raw), "data");
  DatasetPtr data(data_raw);

  size_t n = 0;
  check(sc_dataset_shape(data.get(), &n, nullptr), "data");
  std::vector<double> stacked(n), best(n);
  check(sc_stack_model_predict(model.get(), data.get(), stacked.data(), best.data(), n), "predict");

  FILE* out = stdout;
  if (!out_path.empty()) {
    out = std::fopen(out_path.c_str(), "wb");
    if (out == nullptr) throw Failure{kExitRuntime, "cannot write '" + out_path + "'"};
  }
  std::fprintf(out, "stacked,best\n");
  for (size_t i = 0; i < n; ++i) std::fprintf(out, "%.10g,%.10g\n", stacked[i], best[i]);
  if (out != stdout && std::fclose(out) != 0) throw Failure{kExitRuntime, "error writing '" + out_path + "'"};
  return kExitOk;
}

// ---- verify-lemma1 -----------------------------------------------------------

int run_lemma1(int trials, std::uint64_t seed, double tolerance) {
  sc_lemma1_summary s{};
  check(sc_verify_lemma1(trials, seed, tolerance, &s), "verify-lemma1");
  std::printf("trials                      %d\n", s.trials);
  std::printf("failures                    %d\n", s.failures);
  std::printf("max eig, single candidate   %.15f\n", s.worst_candidate_max_eig);
  std::printf("max eig, weighted average   %.15f\n", s.worst_combined_max_eig);
  std::printf("min eig, weighted average   %.3e\n", s.worst_combined_min_eig);
  std::printf("g-prior spectrum checks     %d (worst error %.3e)\n", s.gprior_checks, s.worst_gprior_error);
  std::printf("tolerance                   %.1e\n", s.tolerance);
  std::printf("%s\n", s.pass ? "PASS" : "FAIL");
  return s.pass ? kExitOk : kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian stacking of regression models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sc_version()));

  SimulateArgs lin_args, log_args;
  auto add_simulate = [&](const char* name, const char* about, SimulateArgs& a) {
    auto* cmd = app.add_subcommand(name, about);
    cmd->add_option("--config", a.config, "JSON config overriding the defaults")->check(CLI::ExistingFile);
    cmd->add_option("--out-csv", a.out_csv, "write the result table here");
    cmd->add_option("--out-svg", a.out_svg, "write the ratio plot here");
    cmd->add_option("--reps", a.reps, "replications per cell")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a.seed, "base seed");
    cmd->add_option("--threads", a.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--timing", a.timing, "record wall-clock seconds in the CSV");
    return cmd;
  };
  auto* sim_lin = add_simulate("simulate-linear", "Monte Carlo study, Gaussian outcomes", lin_args);
  auto* sim_log = add_simulate("simulate-logistic", "Monte Carlo study, binary outcomes", log_args);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("stack-fit", "fit a stack on a CSV file");
  fit_cmd->add_option("--data", fit.data, "CSV with a header row")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--outcome", fit.outcome, "outcome column")->required();
  fit_cmd->add_option("--prior", fit.prior, "candidate prior family")->check(CLI::IsMember({"g", "iso", "t"}));
  fit_cmd->add_option("--grid", fit.grid, "min:max:count[:log] or comma list (nu values for t)")->required();
  fit_cmd->add_option("--t-lambda", fit.t_lambda, "T prior scale multiplier");
  fit_cmd->add_option("--sigma2", fit.sigma2, "noise variance for linear candidates")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--folds", fit.folds, "folds for binary outcomes")->check(CLI::Range(2, 1000000));
  fit_cmd->add_option("--seed", fit.seed, "fold seed");
  fit_cmd->add_option("--out", fit.out, "write the fitted model (JSON)");

  std::string model_path, predict_data, predict_out;
  auto* pred_cmd = app.add_subcommand("predict", "predict with a saved model");
  pred_cmd->add_option("--model", model_path, "model file")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--data", predict_data, "CSV of covariates")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--out", predict_out, "output CSV (default stdout)");

  int trials = 1000;
  std::uint64_t lemma_seed = 1;
  double tolerance = 1e-9;
  auto* lemma_cmd = app.add_subcommand("verify-lemma1", "check hat-matrix eigenvalue bounds on random designs");
  lemma_cmd->add_option("--trials", trials, "random trials")->check(CLI::PositiveNumber);
  lemma_cmd->add_option("--seed", lemma_seed, "seed");
  lemma_cmd->add_option("--tol", tolerance, "eigenvalue tolerance")->check(CLI::NonNegativeNumber);

  if (argc <= 1) {
    std::fputs(app.help().c_str(), stderr);
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::fputs("\n", stderr);
    std::fputs(app.help().c_str(), stderr);
    return kExitUsage;
  }

  try {
    if (sim_lin->parsed()) return run_simulate(SC_FAMILY_LINEAR, lin_args);
    if (sim_log->parsed()) return run_simulate(SC_FAMILY_LOGISTIC, log_args);
    if (fit_cmd->parsed()) return run_fit(fit);
    if (pred_cmd->parsed()) return run_predict(model_path, predict_data, predict_out);
    if (lemma_cmd->parsed()) return run_lemma1(trials, lemma_seed, tolerance);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.exit_code;
  }
  std::fputs(app.help().c_str(), stderr);
  return kExitUsage;
}
