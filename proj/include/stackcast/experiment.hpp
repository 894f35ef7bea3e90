#pragma once

#include "stackcast/stacking.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace stackcast {

/// Which prior parameter the candidates of a simulated stack differ in.
enum class PriorFamily {
  g,       // g prior, linear
  gamma,   // isotropic normal N(0, gamma2 I), linear
  lambda,  // isotropic normal N(0, lambda I), logistic
  t,       // multivariate T with a shared scale, both families
};

const char* to_string(PriorFamily prior) noexcept;
PriorFamily prior_family_from_string(std::string_view name);

enum class GridSpacing { linear, log };

struct CandidateGrid {
  PriorFamily prior = PriorFamily::g;
  double min = 1e-2;
  double max = 1e3;
  int count = 20;
  GridSpacing spacing = GridSpacing::linear;
  std::vector<double> nu_values;  // T grids
  double t_lambda = 2.5;          // T scale multiplier
  std::map<double, double> t_lambda_by_r2;  // per-R^2 override of t_lambda
  std::vector<double> explicit_values;      // overrides min/max/count when set

  /// Parameter values of the grid: g, gamma2, lambda, or nu for T grids.
  std::vector<double> values() const;
  double t_lambda_for(double r2) const;
};

/// Evenly spaced values on [lo, hi] (log spacing is even in log(value)).
std::vector<double> spaced_grid(double lo, double hi, int count, GridSpacing spacing);

/// Candidate list for one simulated training design. T-prior scales are
/// lambda (X'X)^-1 for linear stacks and lambda I for logistic stacks.
std::vector<CandidateSpec> build_candidates(const CandidateGrid& grid, Family family, const MatrixXd& x_train,
                                            double sigma2, double r2);

/// Default cross-validation scheme for a family and prior.
CvScheme default_scheme(Family family, PriorFamily prior, int folds, std::uint64_t seed);

struct ExperimentConfig {
  Family family = Family::linear;
  std::vector<int> n_values;
  std::vector<double> r2_grid;
  int replications = 200;
  CandidateGrid grid;
  int folds = 10;
  int test_size = 500;
  std::uint64_t base_seed = 1;
  int parallelism = 0;  // 0: STACKCAST_THREADS, else 1
  int q = 1000;
  int p_fit = 14;
  double sigma2 = 1.0;
  bool record_timing = false;  // off keeps CSV output byte-reproducible

  /// Desk-scale defaults for each family.
  static ExperimentConfig defaults(Family family);

  void validate() const;
  int resolved_parallelism() const;
};

/// Applies the keys of a flat JSON object on top of `config`. Unknown keys
/// are rejected.
void apply_config_json(ExperimentConfig& config, std::string_view json_text);

/// Defaults for the file's "family" key (or `fallback`), then the file's keys.
ExperimentConfig load_config(const std::filesystem::path& path, Family fallback);

struct ExperimentRow {
  Family family = Family::linear;
  std::string prior_family;
  int n = 0;
  double r2 = 0.0;
  int replications = 0;  // successful replications entering the ratio
  double ratio = 0.0;
  double mc_se = 0.0;
  double mean_stacked_loss = 0.0;
  double mean_best_loss = 0.0;
  double wall_seconds = 0.0;

  // Not part of the CSV schema.
  int failed = 0;
  int oracle_holds = 0;  // replications whose stacked CV error <= best candidate's
  std::vector<std::string> errors;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
};

/// Per-replication outcome, exposed for tests.
struct ReplicationOutcome {
  bool ok = false;
  double stacked_loss = 0.0;
  double best_loss = 0.0;
  double stacked_cv = 0.0;
  double best_cv = 0.0;
  double cv_trace = 0.0;
  bool oracle_holds = false;
  std::string error;
};

ReplicationOutcome run_replication(const ExperimentConfig& config, int n, double r2, std::uint64_t seed);

/// Seed of replication `rep` in the (n, r2) cell.
std::uint64_t replication_seed(std::uint64_t base_seed, int n, double r2, int rep);

/// Runs every (n, r2) cell. Results do not depend on the thread count.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace stackcast
