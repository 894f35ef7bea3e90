#include "stackcast/stackcast.h"

#include "stackcast/dataset.hpp"
#include "stackcast/error.hpp"
#include "stackcast/experiment.hpp"
#include "stackcast/report.hpp"
#include "stackcast/spectral.hpp"
#include "stackcast/stacking.hpp"

#include <json.hpp>

#include <algorithm>
#include <memory>
#include <new>
#include <string>

using namespace stackcast;

struct sc_dataset {
  Dataset data;
};

struct sc_stack_model {
  StackModel model;
};

struct sc_experiment_config {
  ExperimentConfig config;
};

struct sc_experiment_result {
  ExperimentResult result;
};

namespace {

thread_local std::string g_last_error;

sc_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return SC_ERR_INVALID_ARGUMENT;
    case ErrorCode::parse: return SC_ERR_PARSE;
    case ErrorCode::numerical: return SC_ERR_NUMERICAL;
    case ErrorCode::io: return SC_ERR_IO;
    case ErrorCode::verification: return SC_ERR_VERIFICATION;
    case ErrorCode::internal: return SC_ERR_INTERNAL;
  }
  return SC_ERR_INTERNAL;
}

template <typename F>
sc_status guarded(F&& body) noexcept {
  try {
    body();
    return SC_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SC_ERR_INTERNAL;
  }
}

void need(const void* p, const char* name) {
  if (p == nullptr) fail(ErrorCode::invalid_argument, std::string(name) + " must not be NULL");
}

sc_family to_c(Family f) { return f == Family::linear ? SC_FAMILY_LINEAR : SC_FAMILY_LOGISTIC; }
Family from_c(sc_family f) {
  if (f == SC_FAMILY_LINEAR) return Family::linear;
  if (f == SC_FAMILY_LOGISTIC) return Family::logistic;
  fail(ErrorCode::invalid_argument, "unknown family value");
}

void copy_out(const VectorXd& v, double* out, size_t len) {
  need(out, "output buffer");
  if (len < static_cast<size_t>(v.size())) {
    fail(ErrorCode::invalid_argument, "output buffer holds " + std::to_string(len) + " values, need " +
                                          std::to_string(v.size()));
  }
  for (Index i = 0; i < v.size(); ++i) out[i] = v[i];
}

MatrixXd design_for(const StackModel& model, const Dataset& data) {
  const auto& wanted = model.covariate_names;
  if (wanted.empty() || data.covariate_names.empty()) {
    require(data.cols() == static_cast<Index>(model.fits.front().beta.size()),
            "data have " + std::to_string(data.cols()) + " columns, model expects " +
                std::to_string(model.fits.front().beta.size()));
    return data.x;
  }
  MatrixXd x(data.rows(), static_cast<Index>(wanted.size()));
  for (std::size_t j = 0; j < wanted.size(); ++j) {
    Index found = -1;
    for (std::size_t c = 0; c < data.covariate_names.size(); ++c) {
      if (data.covariate_names[c] == wanted[j]) found = static_cast<Index>(c);
    }
    if (found < 0) fail(ErrorCode::invalid_argument, "data have no column '" + wanted[j] + "' required by the model");
    x.col(static_cast<Index>(j)) = data.x.col(found);
  }
  return x;
}

}  // namespace

extern "C" {

const char* sc_version(void) { return "0.1.0"; }

const char* sc_last_error(void) { return g_last_error.c_str(); }

const char* sc_status_string(sc_status status) {
  switch (status) {
    case SC_OK: return "ok";
    case SC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SC_ERR_PARSE: return "parse error";
    case SC_ERR_NUMERICAL: return "numerical failure";
    case SC_ERR_IO: return "I/O error";
    case SC_ERR_VERIFICATION: return "verification failure";
    case SC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// ---- datasets ----------------------------------------------------------------

sc_status sc_dataset_load_csv(const char* path, const char* outcome_column, sc_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<sc_dataset>();
    const CsvTable table = read_csv_table(path);
    if (outcome_column != nullptr) {
      handle->data = dataset_from_table(table, outcome_column);
    } else {
      handle->data.x = table.values;
      handle->data.y = VectorXd::Zero(table.values.rows());
      handle->data.covariate_names = table.header;
      handle->data.validate();
    }
    *out = handle.release();
  });
}

sc_status sc_dataset_from_arrays(const double* x_row_major, size_t n, size_t p, const double* y, sc_dataset** out) {
  return guarded([&] {
    need(x_row_major, "x");
    need(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<sc_dataset>();
    const auto rows = static_cast<Index>(n);
    const auto cols = static_cast<Index>(p);
    handle->data.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        x_row_major, rows, cols);
    handle->data.y = y ? VectorXd(Eigen::Map<const VectorXd>(y, rows)) : VectorXd(VectorXd::Zero(rows));
    handle->data.family = is_binary(handle->data.y) && y ? Family::logistic : Family::linear;
    handle->data.validate();
    *out = handle.release();
  });
}

void sc_dataset_free(sc_dataset* data) { delete data; }

sc_status sc_dataset_shape(const sc_dataset* data, size_t* n, size_t* p) {
  return guarded([&] {
    need(data, "data");
    if (n) *n = static_cast<size_t>(data->data.rows());
    if (p) *p = static_cast<size_t>(data->data.cols());
  });
}

sc_status sc_dataset_family(const sc_dataset* data, sc_family* family) {
  return guarded([&] {
    need(data, "data");
    need(family, "family");
    *family = to_c(data->data.family);
  });
}

// ---- stacks ------------------------------------------------------------------

void sc_fit_options_init(sc_fit_options* options) {
  if (options == nullptr) return;
  options->prior = SC_PRIOR_G;
  options->grid = nullptr;
  options->grid_len = 0;
  options->t_lambda = 1.0;
  options->sigma2 = 1.0;
  options->folds = 10;
  options->seed = 1;
}

sc_status sc_stack_fit(const sc_dataset* data, const sc_fit_options* options, sc_stack_model** out) {
  return guarded([&] {
    need(data, "data");
    need(options, "options");
    need(out, "out");
    *out = nullptr;
    require(options->grid != nullptr && options->grid_len > 0, "the candidate grid must not be empty");
    const Dataset& d = data->data;

    CandidateGrid grid;
    switch (options->prior) {
      case SC_PRIOR_G: grid.prior = PriorFamily::g; break;
      case SC_PRIOR_ISO: grid.prior = d.family == Family::linear ? PriorFamily::gamma : PriorFamily::lambda; break;
      case SC_PRIOR_T: grid.prior = PriorFamily::t; break;
      default: fail(ErrorCode::invalid_argument, "unknown prior family value");
    }
    grid.explicit_values.assign(options->grid, options->grid + options->grid_len);
    grid.t_lambda = options->t_lambda;
    require(options->t_lambda > 0.0, "t_lambda must be positive");

    auto specs = build_candidates(grid, d.family, d.x, options->sigma2, 0.0);
    int folds = options->folds;
    if (d.family == Family::logistic) folds = std::min<int>(folds, static_cast<int>(d.rows()));
    const CvScheme scheme = default_scheme(d.family, grid.prior, folds, options->seed);
    auto handle = std::make_unique<sc_stack_model>();
    handle->model = fit_stack(d, std::move(specs), scheme);
    *out = handle.release();
  });
}

sc_status sc_stack_model_load(const char* path, sc_stack_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<sc_stack_model>();
    handle->model = load_model(path);
    *out = handle.release();
  });
}

sc_status sc_stack_model_save(const sc_stack_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    save_model(model->model, path);
  });
}

void sc_stack_model_free(sc_stack_model* model) { delete model; }

sc_status sc_stack_model_size(const sc_stack_model* model, size_t* k) {
  return guarded([&] {
    need(model, "model");
    need(k, "k");
    *k = static_cast<size_t>(model->model.size());
  });
}

sc_status sc_stack_model_family(const sc_stack_model* model, sc_family* family) {
  return guarded([&] {
    need(model, "model");
    need(family, "family");
    *family = to_c(model->model.family);
  });
}

sc_status sc_stack_model_weights(const sc_stack_model* model, double* out, size_t len) {
  return guarded([&] {
    need(model, "model");
    copy_out(model->model.weights.w, out, len);
  });
}

sc_status sc_stack_model_cv_errors(const sc_stack_model* model, double* out, size_t len) {
  return guarded([&] {
    need(model, "model");
    copy_out(model->model.cv_errors, out, len);
  });
}

sc_status sc_stack_model_best_index(const sc_stack_model* model, size_t* index) {
  return guarded([&] {
    need(model, "model");
    need(index, "index");
    *index = static_cast<size_t>(model->model.best_index);
  });
}

sc_status sc_stack_model_stacked_cv_error(const sc_stack_model* model, double* value) {
  return guarded([&] {
    need(model, "model");
    need(value, "value");
    *value = model->model.stacked_cv_error();
  });
}

sc_status sc_stack_model_label(const sc_stack_model* model, size_t k, const char** label) {
  return guarded([&] {
    need(model, "model");
    need(label, "label");
    require(k < static_cast<size_t>(model->model.size()), "candidate index out of range");
    *label = model->model.specs[k].label.c_str();
  });
}

sc_status sc_stack_model_predict(const sc_stack_model* model, const sc_dataset* data, double* stacked, double* best,
                                 size_t n) {
  return guarded([&] {
    need(model, "model");
    need(data, "data");
    require(n >= static_cast<size_t>(data->data.rows()), "output buffers are shorter than the row count");
    const MatrixXd x = design_for(model->model, data->data);
    if (stacked) copy_out(predict(model->model, x), stacked, n);
    if (best) copy_out(predict_candidate(model->model, model->model.best_index, x), best, n);
  });
}

// ---- experiments -------------------------------------------------------------

sc_status sc_experiment_config_default(sc_family family, sc_experiment_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<sc_experiment_config>();
    handle->config = ExperimentConfig::defaults(from_c(family));
    *out = handle.release();
  });
}

sc_status sc_experiment_config_load(const char* path, sc_family fallback, sc_experiment_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<sc_experiment_config>();
    handle->config = load_config(path, from_c(fallback));
    *out = handle.release();
  });
}

sc_status sc_experiment_config_set(sc_experiment_config* config, const char* key, const char* json_value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(json_value, "value");
    nlohmann::json doc = nlohmann::json::object();
    try {
      doc[key] = nlohmann::json::parse(json_value);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse, std::string("value for '") + key + "' is not valid JSON: " + e.what());
    }
    ExperimentConfig updated = config->config;
    apply_config_json(updated, doc.dump());
    config->config = std::move(updated);
  });
}

sc_status sc_experiment_config_family(const sc_experiment_config* config, sc_family* family) {
  return guarded([&] {
    need(config, "config");
    need(family, "family");
    *family = to_c(config->config.family);
  });
}

void sc_experiment_config_free(sc_experiment_config* config) { delete config; }

sc_status sc_experiment_run(const sc_experiment_config* config, sc_experiment_result** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<sc_experiment_result>();
    handle->result = run_experiment(config->config);
    *out = handle.release();
  });
}

void sc_experiment_result_free(sc_experiment_result* result) { delete result; }

sc_status sc_experiment_result_rows(const sc_experiment_result* result, size_t* rows) {
  return guarded([&] {
    need(result, "result");
    need(rows, "rows");
    *rows = result->result.rows.size();
  });
}

sc_status sc_experiment_result_row(const sc_experiment_result* result, size_t index, sc_result_row* row) {
  return guarded([&] {
    need(result, "result");
    need(row, "row");
    require(index < result->result.rows.size(), "row index out of range");
    const ExperimentRow& r = result->result.rows[index];
    row->family = to_c(r.family);
    row->prior_family = r.prior_family.c_str();
    row->n = r.n;
    row->r2 = r.r2;
    row->replications = r.replications;
    row->ratio = r.ratio;
    row->mc_se = r.mc_se;
    row->mean_stacked_loss = r.mean_stacked_loss;
    row->mean_best_loss = r.mean_best_loss;
    row->wall_seconds = r.wall_seconds;
    row->failed_replications = r.failed;
    row->oracle_holds = r.oracle_holds;
  });
}

sc_status sc_experiment_result_write_csv(const sc_experiment_result* result, const char* path) {
  return guarded([&] {
    need(result, "result");
    need(path, "path");
    emit_csv(result->result, path);
  });
}

sc_status sc_experiment_result_write_svg(const sc_experiment_result* result, const char* path) {
  return guarded([&] {
    need(result, "result");
    need(path, "path");
    emit_plot(result->result, path);
  });
}

// ---- spectral ----------------------------------------------------------------

sc_status sc_verify_lemma1(int trials, uint64_t seed, double tolerance, sc_lemma1_summary* summary) {
  return guarded([&] {
    need(summary, "summary");
    require(tolerance >= 0.0, "tolerance must be non-negative");
    const Lemma1Summary s = run_lemma1_trials(trials, seed, tolerance);
    summary->trials = s.trials;
    summary->failures = s.failures;
    summary->worst_candidate_max_eig = s.worst_candidate_max;
    summary->worst_combined_max_eig = s.worst_combined_max;
    summary->worst_combined_min_eig = s.worst_combined_min;
    summary->gprior_checks = s.gprior_checks;
    summary->worst_gprior_error = s.worst_gprior_error;
    summary->tolerance = s.tolerance;
    summary->pass = s.pass() ? 1 : 0;
  });
}

}  // extern "C"
