/*
 * stackcast C interface.
 *
 * Objects are opaque handles created by *_create / *_load functions and
 * released by the matching *_free function (which accepts NULL). Every
 * fallible call returns an sc_status; on failure a description is available
 * from sc_last_error() on the same thread until the next failing call.
 */
#ifndef STACKCAST_H
#define STACKCAST_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(STACKCAST_BUILDING)
#    define SC_API __declspec(dllexport)
#  else
#    define SC_API __declspec(dllimport)
#  endif
#else
#  define SC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sc_status {
  SC_OK = 0,
  SC_ERR_INVALID_ARGUMENT = 1,
  SC_ERR_PARSE = 2,
  SC_ERR_NUMERICAL = 3,
  SC_ERR_IO = 4,
  SC_ERR_VERIFICATION = 5,
  SC_ERR_INTERNAL = 6
} sc_status;

typedef enum sc_family { SC_FAMILY_LINEAR = 0, SC_FAMILY_LOGISTIC = 1 } sc_family;

typedef enum sc_prior_family {
  SC_PRIOR_G = 0,      /* g prior, linear stacks */
  SC_PRIOR_ISO = 1,    /* isotropic normal: gamma2 (linear) or lambda (logistic) */
  SC_PRIOR_T = 2       /* multivariate T, grid over nu */
} sc_prior_family;

typedef struct sc_dataset sc_dataset;
typedef struct sc_stack_model sc_stack_model;
typedef struct sc_experiment_config sc_experiment_config;
typedef struct sc_experiment_result sc_experiment_result;

SC_API const char* sc_version(void);
SC_API const char* sc_last_error(void);
SC_API const char* sc_status_string(sc_status status);

/* ---- datasets ------------------------------------------------------------ */

/* Loads a numeric CSV with a header row. When outcome_column is NULL every
 * column is a covariate and the outcome vector is zero (prediction input). */
SC_API sc_status sc_dataset_load_csv(const char* path, const char* outcome_column, sc_dataset** out);

/* Builds a dataset from a row-major n x p design and an outcome vector. */
SC_API sc_status sc_dataset_from_arrays(const double* x_row_major, size_t n, size_t p, const double* y,
                                        sc_dataset** out);
SC_API void sc_dataset_free(sc_dataset* data);
SC_API sc_status sc_dataset_shape(const sc_dataset* data, size_t* n, size_t* p);
SC_API sc_status sc_dataset_family(const sc_dataset* data, sc_family* family);

/* ---- stacks -------------------------------------------------------------- */

typedef struct sc_fit_options {
  sc_prior_family prior;
  const double* grid;    /* g, gamma2/lambda, or nu values */
  size_t grid_len;
  double t_lambda;       /* T scale multiplier: lambda (X'X)^-1 linear, lambda I logistic */
  double sigma2;         /* linear likelihood variance */
  int folds;             /* K-fold count for logistic stacks */
  uint64_t seed;         /* fold assignment seed */
} sc_fit_options;

/* Fills options with defaults (g prior, sigma2 = 1, t_lambda = 1, 10 folds). */
SC_API void sc_fit_options_init(sc_fit_options* options);

SC_API sc_status sc_stack_fit(const sc_dataset* data, const sc_fit_options* options, sc_stack_model** out);
SC_API sc_status sc_stack_model_load(const char* path, sc_stack_model** out);
SC_API sc_status sc_stack_model_save(const sc_stack_model* model, const char* path);
SC_API void sc_stack_model_free(sc_stack_model* model);

SC_API sc_status sc_stack_model_size(const sc_stack_model* model, size_t* k);
SC_API sc_status sc_stack_model_family(const sc_stack_model* model, sc_family* family);
/* Copies k values into the caller's buffer (len must be >= k). */
SC_API sc_status sc_stack_model_weights(const sc_stack_model* model, double* out, size_t len);
SC_API sc_status sc_stack_model_cv_errors(const sc_stack_model* model, double* out, size_t len);
SC_API sc_status sc_stack_model_best_index(const sc_stack_model* model, size_t* index);
SC_API sc_status sc_stack_model_stacked_cv_error(const sc_stack_model* model, double* value);
/* The returned string is owned by the model. */
SC_API sc_status sc_stack_model_label(const sc_stack_model* model, size_t k, const char** label);

/* Predicts for every row of data. Columns are matched to the model's
 * covariates by name when the dataset has names, else by position. stacked
 * and best (either may be NULL) must hold n values. */
SC_API sc_status sc_stack_model_predict(const sc_stack_model* model, const sc_dataset* data, double* stacked,
                                        double* best, size_t n);

/* ---- simulation experiments ---------------------------------------------- */

SC_API sc_status sc_experiment_config_default(sc_family family, sc_experiment_config** out);
/* Defaults for the file's family (or fallback), overlaid with the file. */
SC_API sc_status sc_experiment_config_load(const char* path, sc_family fallback, sc_experiment_config** out);
/* Sets one key; value is JSON text, e.g. ("replications", "200"),
 * ("prior", "\"t\""), ("r2_grid", "[0.2,0.5]"). */
SC_API sc_status sc_experiment_config_set(sc_experiment_config* config, const char* key, const char* json_value);
SC_API sc_status sc_experiment_config_family(const sc_experiment_config* config, sc_family* family);
SC_API void sc_experiment_config_free(sc_experiment_config* config);

SC_API sc_status sc_experiment_run(const sc_experiment_config* config, sc_experiment_result** out);
SC_API void sc_experiment_result_free(sc_experiment_result* result);

typedef struct sc_result_row {
  sc_family family;
  const char* prior_family; /* owned by the result */
  int n;
  double r2;
  int replications;
  double ratio;
  double mc_se;
  double mean_stacked_loss;
  double mean_best_loss;
  double wall_seconds;
  int failed_replications;
  int oracle_holds; /* replications whose stacked CV error <= best candidate's */
} sc_result_row;

SC_API sc_status sc_experiment_result_rows(const sc_experiment_result* result, size_t* rows);
SC_API sc_status sc_experiment_result_row(const sc_experiment_result* result, size_t index, sc_result_row* row);
SC_API sc_status sc_experiment_result_write_csv(const sc_experiment_result* result, const char* path);
SC_API sc_status sc_experiment_result_write_svg(const sc_experiment_result* result, const char* path);

/* ---- spectral verification ----------------------------------------------- */

typedef struct sc_lemma1_summary {
  int trials;
  int failures;
  double worst_candidate_max_eig;
  double worst_combined_max_eig;
  double worst_combined_min_eig;
  int gprior_checks;
  double worst_gprior_error;
  double tolerance;
  int pass;
} sc_lemma1_summary;

/* Random hat-matrix eigenvalue checks. Returns SC_OK when the checks ran,
 * whatever their outcome; inspect summary->pass. */
SC_API sc_status sc_verify_lemma1(int trials, uint64_t seed, double tolerance, sc_lemma1_summary* summary);

#ifdef __cplusplus
}
#endif

#endif /* STACKCAST_H */
