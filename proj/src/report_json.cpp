#include "cspcr/report_json.hpp"

#include <cstdio>
#include <json.hpp>

namespace cspcr {

namespace {

using nlohmann::json;

// 17 significant digits: lossless for IEEE doubles.
std::string num17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string array17(const Eigen::VectorXd& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += num17(v[i]);
  }
  out += "]";
  return out;
}

Eigen::VectorXd vector_from(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

json to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json to_json(const GaussianLinearModel& m) {
  return json{{"coefficients", to_json(m.coefficients)},
              {"intercept", m.intercept},
              {"noise_variance", m.noise_variance}};
}

GaussianLinearModel gaussian_from(const json& j) {
  GaussianLinearModel m;
  m.coefficients = vector_from(j.at("coefficients"));
  m.intercept = j.at("intercept").get<double>();
  m.noise_variance = j.at("noise_variance").get<double>();
  if (!(m.noise_variance > 0.0))
    throw ValidationError(ValidationError::Kind::other,
                          "model file: noise_variance must be > 0");
  return m;
}

json to_json(const ClassifierRatio& cr) {
  return json{{"coefficients", to_json(cr.coefficients)},
              {"intercept", cr.intercept},
              {"prior_correction", cr.prior_correction}};
}

ClassifierRatio classifier_from(const json& j) {
  ClassifierRatio cr;
  cr.coefficients = vector_from(j.at("coefficients"));
  cr.intercept = j.at("intercept").get<double>();
  cr.prior_correction = j.at("prior_correction").get<double>();
  return cr;
}

void check_schema(const json& j) {
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
    throw ValidationError(ValidationError::Kind::other,
                          "model file: unsupported schema_version");
}

}  // namespace

std::string report_to_json(const TestReport& report) {
  std::string out = "{\n";
  out += "  \"method\": \"" + to_string(report.method) + "\",\n";
  out += "  \"n\": " + std::to_string(report.n) + ",\n";
  out += "  \"K\": " + std::to_string(report.K) + ",\n";
  out += "  \"L\": " + std::to_string(report.L) + ",\n";
  out += "  \"alpha\": " + num17(report.alpha) + ",\n";
  out += "  \"seed\": " + std::to_string(report.seed) + ",\n";
  out += "  \"statistic_U\": " + num17(report.statistic) + ",\n";
  out += "  \"threshold\": " + num17(report.threshold) + ",\n";
  out += "  \"p_value\": " + num17(report.p_value) + ",\n";
  out += std::string("  \"reject\": ") + (report.reject ? "true" : "false") + ",\n";
  out += "  \"per_label\": {\n";
  out += "    \"W\": " + array17(report.per_label.W) + ",\n";
  out += "    \"D\": " + array17(report.per_label.D);
  if (report.per_label.W_tilde)
    out += ",\n    \"W_tilde\": " + array17(*report.per_label.W_tilde);
  if (report.per_label.gamma)
    out += ",\n    \"gamma\": " + array17(*report.per_label.gamma);
  out += "\n  },\n";
  out += "  \"spectral\": {\n";
  out += "    \"lambdas\": " + array17(report.spectral.lambdas) + ",\n";
  out += "    \"clipped_mass\": " + num17(report.spectral.clipped_mass) + "\n";
  out += "  },\n";
  out += "  \"diagnostics\": {\n";
  out += "    \"weight_mean\": " + num17(report.diagnostics.weight_mean) + ",\n";
  out += "    \"weight_max\": " + num17(report.diagnostics.weight_max) + ",\n";
  out += "    \"ess\": " + num17(report.diagnostics.ess) + ",\n";
  out += "    \"clamp_count\": " + std::to_string(report.diagnostics.clamp_count) + "\n";
  out += "  }\n";
  out += "}\n";
  return out;
}

TestReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  TestReport r;
  r.method = method_from_string(j.at("method").get<std::string>());
  r.n = j.at("n").get<int>();
  r.K = j.at("K").get<int>();
  r.L = j.at("L").get<int>();
  r.alpha = j.at("alpha").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.statistic = j.at("statistic_U").get<double>();
  r.threshold = j.at("threshold").get<double>();
  r.p_value = j.at("p_value").get<double>();
  r.reject = j.at("reject").get<bool>();
  const json& pl = j.at("per_label");
  r.per_label.W = vector_from(pl.at("W"));
  r.per_label.D = vector_from(pl.at("D"));
  if (pl.contains("W_tilde")) r.per_label.W_tilde = vector_from(pl.at("W_tilde"));
  if (pl.contains("gamma")) r.per_label.gamma = vector_from(pl.at("gamma"));
  r.spectral.lambdas = vector_from(j.at("spectral").at("lambdas"));
  r.spectral.clipped_mass = j.at("spectral").at("clipped_mass").get<double>();
  const json& d = j.at("diagnostics");
  r.diagnostics.weight_mean = d.at("weight_mean").get<double>();
  r.diagnostics.weight_max = d.at("weight_max").get<double>();
  r.diagnostics.ess = d.at("ess").get<double>();
  r.diagnostics.clamp_count = d.at("clamp_count").get<std::uint64_t>();
  return r;
}

std::string ratio_model_to_json(const FactorizedRatio& fr) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = fr.v_source.empty() && fr.xz_classifier ? "classifier" : "factorized";
  if (fr.xz_classifier)
    j["xz_classifier"] = to_json(*fr.xz_classifier);
  else
    j["xz_classifier"] = nullptr;
  json vs = json::array(), vt = json::array();
  for (const auto& m : fr.v_source) vs.push_back(to_json(m));
  for (const auto& m : fr.v_target) vt.push_back(to_json(m));
  j["v_source"] = vs;
  j["v_target"] = vt;
  return j.dump(2) + "\n";
}

FactorizedRatio ratio_model_from_json(const std::string& text) {
  const json j = json::parse(text);
  check_schema(j);
  FactorizedRatio fr;
  if (j.contains("xz_classifier") && !j.at("xz_classifier").is_null())
    fr.xz_classifier = classifier_from(j.at("xz_classifier"));
  for (const auto& m : j.at("v_source")) fr.v_source.push_back(gaussian_from(m));
  for (const auto& m : j.at("v_target")) fr.v_target.push_back(gaussian_from(m));
  if (fr.v_source.size() != fr.v_target.size())
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "model file: v_source and v_target sizes differ");
  return fr;
}

std::string sampler_model_to_json(const GaussianLinearModel& m) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = "gaussian_linear";
  j["coefficients"] = to_json(m.coefficients);
  j["intercept"] = m.intercept;
  j["noise_variance"] = m.noise_variance;
  return j.dump(2) + "\n";
}

GaussianLinearModel sampler_model_from_json(const std::string& text) {
  const json j = json::parse(text);
  check_schema(j);
  if (j.at("kind").get<std::string>() != "gaussian_linear")
    throw ValidationError(ValidationError::Kind::other,
                          "sampler file: kind must be gaussian_linear");
  return gaussian_from(j);
}

std::string factorized_fit_to_json(const FactorizedFitResult& fit) {
  json j = json::parse(ratio_model_to_json(fit.ratio));
  auto fit_details = [](const std::vector<ElasticNetFit>& fits) {
    json arr = json::array();
    for (const auto& f : fits) {
      arr.push_back(json{{"lambda_chosen", f.lambda_chosen},
                         {"mixing", f.mixing},
                         {"cv_folds", f.cv_folds},
                         {"converged", f.converged},
                         {"standardization",
                          json{{"mean", to_json(f.standardization.mean)},
                               {"scale", to_json(f.standardization.scale)}}}});
    }
    return arr;
  };
  j["fit_details"] = json{{"v_source", fit_details(fit.fits_source)},
                          {"v_target", fit_details(fit.fits_target)}};
  return j.dump(2) + "\n";
}

}  // namespace cspcr
