#include "stackcast/stacking.hpp"

#include "stackcast/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace stackcast {

Index argmin_lowest(const VectorXd& values) {
  require(values.size() >= 1, "argmin of an empty vector");
  Index best = 0;
  for (Index k = 1; k < values.size(); ++k) {
    if (values[k] < values[best]) best = k;
  }
  return best;
}

StackModel fit_stack(const Dataset& data, std::vector<CandidateSpec> specs, const CvScheme& scheme) {
  data.validate();
  require(!specs.empty(), "a stack needs at least one candidate");
  for (const auto& spec : specs) {
    require(spec.family == data.family, "candidate '" + spec.label + "' is " + to_string(spec.family) +
                                            " but the data are " + to_string(data.family));
    spec.validate();
  }
  require(data.family == Family::linear || scheme.kind == CvKind::kfold,
          "logistic candidates are cross-validated by K-fold refitting");

  StackModel model;
  model.family = data.family;
  model.scheme = scheme;
  model.covariate_names = data.covariate_names;

  const CvPredictionMatrix predictions = cv_predictions(data, specs, scheme);
  const GramMatrix s = gram(residuals(data.y, predictions));
  model.weights = solve_weights(s);
  model.cv_errors = s.s.diagonal();
  model.best_index = argmin_lowest(model.cv_errors);

  model.fits.reserve(specs.size());
  for (const auto& spec : specs) {
    try {
      model.fits.push_back(fit_candidate(data, spec));
    } catch (const Error& e) {
      const std::string tag = "candidate '" + spec.label + "'";
      const std::string what = e.what();
      fail(e.code(), what.find(tag) == std::string::npos ? tag + ": " + what : what);
    }
  }
  model.specs = std::move(specs);
  return model;
}

VectorXd predict_candidate(const StackModel& model, Index k, const MatrixXd& x_new) {
  require(k >= 0 && k < model.size(), "candidate index out of range");
  return candidate_predictions(model.family, x_new, model.fits[static_cast<std::size_t>(k)].beta);
}

VectorXd predict(const StackModel& model, const MatrixXd& x_new) {
  require(model.size() >= 1, "empty stack");
  VectorXd out = VectorXd::Zero(x_new.rows());
  for (Index k = 0; k < model.size(); ++k) {
    const double w = model.weights.w[k];
    if (w == 0.0) continue;
    out += w * predict_candidate(model, k, x_new);
  }
  return out;
}

// ---- ratios ----------------------------------------------------------------

void RatioAccumulator::add(double stacked_loss, double best_loss) {
  stacked_.push_back(stacked_loss);
  best_.push_back(best_loss);
}

namespace {
double mean(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}
}  // namespace

double RatioAccumulator::mean_stacked() const { return mean(stacked_); }
double RatioAccumulator::mean_best() const { return mean(best_); }

double RatioAccumulator::ratio() const {
  require(!stacked_.empty(), "no replications accumulated");
  const double denom = mean_best();
  if (!(denom != 0.0)) fail(ErrorCode::numerical, "ratio undefined: the best candidate's mean loss is zero");
  return mean_stacked() / denom;
}

double RatioAccumulator::standard_error() const {
  const std::size_t r = count();
  if (r < 2) return 0.0;
  const double ma = mean_stacked();
  const double mb = mean_best();
  double vaa = 0.0;
  double vbb = 0.0;
  double vab = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double da = stacked_[i] - ma;
    const double db = best_[i] - mb;
    vaa += da * da;
    vbb += db * db;
    vab += da * db;
  }
  const double denom = static_cast<double>(r - 1);
  vaa /= denom;
  vbb /= denom;
  vab /= denom;
  const double ratio = ma / mb;
  const double var = (vaa - 2.0 * ratio * vab + ratio * ratio * vbb) / (static_cast<double>(r) * mb * mb);
  return std::sqrt(std::max(var, 0.0));
}

double squared_error(const VectorXd& truth, const VectorXd& prediction) {
  require(truth.size() == prediction.size(), "vector lengths differ");
  return (truth - prediction).squaredNorm();
}

double ratio_linear(const VectorXd& truth_mu, const VectorXd& stacked, const VectorXd& best,
                    RatioAccumulator& accumulator) {
  accumulator.add(squared_error(truth_mu, stacked), squared_error(truth_mu, best));
  return accumulator.ratio();
}

double ratio_logistic(const VectorXd& truth_p, const VectorXd& stacked, const VectorXd& best,
                      RatioAccumulator& accumulator) {
  return ratio_linear(truth_p, stacked, best, accumulator);
}

// ---- serialization ----------------------------------------------------------

namespace {

using nlohmann::json;

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    require(static_cast<Index>(row.size()) == cols, "ragged matrix in model file");
    for (Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json vector_to_json(const VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
}

json prior_to_json(const PriorSpec& prior) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, IsotropicNormal>) return {{"type", "isotropic_normal"}, {"gamma2", p.gamma2}};
        else if constexpr (std::is_same_v<T, GPrior>) return {{"type", "g_prior"}, {"g", p.g}};
        else if constexpr (std::is_same_v<T, GeneralNormal>) return {{"type", "general_normal"}, {"covariance", matrix_to_json(p.covariance)}};
        else if constexpr (std::is_same_v<T, IsoNormalLogistic>) return {{"type", "iso_normal_logistic"}, {"lambda", p.lambda}};
        else return {{"type", "multi_t"}, {"nu", p.nu}, {"scale", matrix_to_json(p.scale)}};
      },
      prior.variant());
}

PriorSpec prior_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "isotropic_normal") return PriorSpec::isotropic_normal(j.at("gamma2").get<double>());
  if (type == "g_prior") return PriorSpec::g_prior(j.at("g").get<double>());
  if (type == "general_normal") return PriorSpec::general_normal(matrix_from_json(j.at("covariance")));
  if (type == "iso_normal_logistic") return PriorSpec::iso_normal_logistic(j.at("lambda").get<double>());
  if (type == "multi_t") return PriorSpec::multi_t(j.at("nu").get<double>(), matrix_from_json(j.at("scale")));
  fail(ErrorCode::parse, "unknown prior type '" + type + "'");
}

const char* kind_name(CvKind kind) {
  switch (kind) {
    case CvKind::loo_closed_form: return "loo_closed_form";
    case CvKind::loo_refit: return "loo_refit";
    case CvKind::kfold: return "kfold";
  }
  return "unknown";
}

CvKind kind_from_name(const std::string& name) {
  if (name == "loo_closed_form") return CvKind::loo_closed_form;
  if (name == "loo_refit") return CvKind::loo_refit;
  if (name == "kfold") return CvKind::kfold;
  fail(ErrorCode::parse, "unknown cross-validation scheme '" + name + "'");
}

}  // namespace

std::string model_to_json(const StackModel& model) {
  json candidates = json::array();
  for (std::size_t k = 0; k < model.specs.size(); ++k) {
    const auto& spec = model.specs[k];
    const auto& fit = model.fits[k];
    candidates.push_back({{"label", spec.label},
                          {"sigma2", spec.sigma2},
                          {"prior", prior_to_json(spec.prior)},
                          {"beta", vector_to_json(fit.beta)},
                          {"converged", fit.converged},
                          {"grad_norm", fit.grad_norm},
                          {"iterations", fit.iterations},
                          {"cv_error", model.cv_errors[static_cast<Index>(k)]},
                          {"weight", model.weights.w[static_cast<Index>(k)]}});
  }
  json doc = {{"format", "stackcast-model"},
              {"version", 1},
              {"family", to_string(model.family)},
              {"covariates", model.covariate_names},
              {"cv_scheme", {{"kind", kind_name(model.scheme.kind)}, {"folds", model.scheme.folds}, {"seed", model.scheme.seed}}},
              {"best_index", model.best_index},
              {"stacked_cv_error", model.weights.objective},
              {"kkt_residual", model.weights.kkt_residual},
              {"solver_iterations", model.weights.iterations},
              {"solver_converged", model.weights.converged},
              {"candidates", std::move(candidates)}};
  return doc.dump(2) + "\n";
}

StackModel model_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    require(doc.at("format").get<std::string>() == "stackcast-model", "not a stackcast model file");
    StackModel model;
    model.family = family_from_string(doc.at("family").get<std::string>());
    model.covariate_names = doc.at("covariates").get<std::vector<std::string>>();
    const json& scheme = doc.at("cv_scheme");
    model.scheme = {kind_from_name(scheme.at("kind").get<std::string>()), scheme.at("folds").get<int>(),
                    scheme.at("seed").get<std::uint64_t>()};
    model.best_index = doc.at("best_index").get<Index>();
    const json& candidates = doc.at("candidates");
    const auto k = static_cast<Index>(candidates.size());
    require(k >= 1, "model file has no candidates");
    model.cv_errors.resize(k);
    model.weights.w.resize(k);
    for (Index i = 0; i < k; ++i) {
      const json& c = candidates.at(static_cast<std::size_t>(i));
      CandidateSpec spec{model.family, prior_from_json(c.at("prior")), c.at("sigma2").get<double>(),
                         c.at("label").get<std::string>()};
      FitResult fit;
      fit.beta = vector_from_json(c.at("beta"));
      fit.converged = c.at("converged").get<bool>();
      fit.grad_norm = c.at("grad_norm").get<double>();
      fit.iterations = c.at("iterations").get<int>();
      // Models fitted from unnamed arrays carry no names; keep lengths consistent instead.
      Index expected = static_cast<Index>(model.covariate_names.size());
      if (expected == 0) expected = model.fits.empty() ? fit.beta.size() : model.fits.front().beta.size();
      require(fit.beta.size() == expected && expected > 0,
              "candidate '" + spec.label + "' has the wrong coefficient length");
      model.cv_errors[i] = c.at("cv_error").get<double>();
      model.weights.w[i] = c.at("weight").get<double>();
      model.specs.push_back(std::move(spec));
      model.fits.push_back(std::move(fit));
    }
    require(model.best_index >= 0 && model.best_index < k, "best_index out of range");
    model.weights.objective = doc.at("stacked_cv_error").get<double>();
    model.weights.kkt_residual = doc.at("kkt_residual").get<double>();
    model.weights.iterations = doc.at("solver_iterations").get<int>();
    model.weights.converged = doc.at("solver_converged").get<bool>();
    return model;
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const StackModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write '" + path.string() + "'");
  out << model_to_json(model);
  if (!out) fail(ErrorCode::io, "error writing '" + path.string() + "'");
}

StackModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace stackcast
