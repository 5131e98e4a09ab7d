#include "gencov/report_json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gencov {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "' for digest");
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex_digest(ss.str());
}

ordered_json to_json(const RunManifest& manifest) {
  ordered_json inputs = ordered_json::object();
  for (const auto& [path, digest] : manifest.input_digests) {
    inputs[path] = digest;
  }
  return ordered_json{{"command_line", manifest.command_line},
                      {"config_digest", manifest.config_digest},
                      {"seed", manifest.seed},
                      {"version", manifest.version},
                      {"wall_clock_seconds", manifest.wall_clock_seconds},
                      {"input_digests", inputs}};
}

ordered_json to_json(const CovarianceReport& r) {
  ordered_json doc{{"estimate", r.estimate},
                      {"se", r.se},
                      {"ci_lower", r.ci_lower},
                      {"ci_upper", r.ci_upper},
                      {"alpha", r.alpha},
                      {"n_y", r.n_y},
                      {"n_z", r.n_z},
                      {"n_overlap", r.n_overlap},
                      {"N", r.n_union},
                      {"mode", mode_name(r.mode)},
                      {"lambda_f", r.lambda_f},
                      {"lambda_g", r.lambda_g},
                      {"support_f", r.support_f},
                      {"support_g", r.support_g},
                      {"mu_f", r.mu_f},
                      {"mu_g", r.mu_g},
                      {"seed", r.seed},
                      {"degenerate_se", r.degenerate_se}};
  if (r.mode == EstimatorMode::cross_fitted) {
    doc["cross_fit"] = ordered_json{{"estimate_1", r.half_estimate_1},
                                    {"estimate_2", r.half_estimate_2},
                                    {"sigma2_1", r.half_sigma2_1},
                                    {"sigma2_2", r.half_sigma2_2}};
  }
  return doc;
}

ordered_json to_json(const WeightedReport& r) {
  ordered_json doc = to_json(r.base);
  doc["beta0_star"] = r.beta0_star;
  doc["sigma2_y0"] = r.sigma2_y0;
  doc["sigma2_y1"] = r.sigma2_y1;
  doc["sigma2_z"] = r.sigma2_z;
  doc["control_weight"] = r.control_weight;
  doc["case_weight"] = r.case_weight;
  doc["prevalence"] = r.prevalence;
  doc["case_fraction"] = r.case_fraction;
  return doc;
}

namespace {

template <typename E>
struct NamedValue {
  E value;
  const char* name;
};

constexpr NamedValue<OverlapMode> kOverlapNames[] = {
    {OverlapMode::full, "full"},
    {OverlapMode::disjoint, "disjoint"},
    {OverlapMode::partial, "partial"}};
constexpr NamedValue<DesignKind> kDesignNames[] = {
    {DesignKind::gaussian_ar1, "gaussian-ar1"},
    {DesignKind::synthetic_genotype, "synthetic-genotype"}};
constexpr NamedValue<CoefScheme> kSchemeNames[] = {
    {CoefScheme::ones, "ones"}, {CoefScheme::gaussian, "gaussian"}};
constexpr NamedValue<CoefPositions> kPositionNames[] = {
    {CoefPositions::first_s, "first"}, {CoefPositions::random_s, "random"}};
constexpr NamedValue<TrueModel> kModelNames[] = {
    {TrueModel::linear, "linear"},
    {TrueModel::logistic, "logistic"},
    {TrueModel::probit, "probit"},
    {TrueModel::m1, "m1"},
    {TrueModel::m2, "m2"}};
constexpr NamedValue<Family> kFamilyNames[] = {
    {Family::linear, "linear"}, {Family::logistic, "logistic"}};
constexpr NamedValue<HarnessEstimator> kEstimatorNames[] = {
    {HarnessEstimator::standard, "standard"},
    {HarnessEstimator::cross_fit, "cross-fit"},
    {HarnessEstimator::case_control, "case-control"}};
constexpr NamedValue<TruthKind> kTruthNames[] = {
    {TruthKind::genetic_covariance, "genetic-covariance"},
    {TruthKind::narrow_sense, "narrow-sense"}};
constexpr NamedValue<SelectionRule> kSelectionNames[] = {
    {SelectionRule::min_cv_error, "min-cv-error"},
    {SelectionRule::one_se, "one-se"}};

template <typename E, std::size_t N>
const char* enum_name(const NamedValue<E> (&table)[N], E value) {
  for (const auto& nv : table) {
    if (nv.value == value) return nv.name;
  }
  fail(ErrorKind::config, "unknown enum value");
}

template <typename E, std::size_t N>
E enum_value(const NamedValue<E> (&table)[N], const std::string& name,
             const std::string& field) {
  for (const auto& nv : table) {
    if (name == nv.name) return nv.value;
  }
  fail(ErrorKind::config, "config field '" + field + "': unknown value '" +
                              name + "'");
}

}  // namespace

ordered_json config_to_json(const SimulationConfig& c) {
  return ordered_json{
      {"n_y", c.n_y},
      {"n_z", c.n_z},
      {"overlap", enum_name(kOverlapNames, c.overlap)},
      {"n_overlap", c.n_overlap},
      {"p", c.p},
      {"design", enum_name(kDesignNames, c.design)},
      {"rho", c.rho},
      {"maf", c.maf},
      {"s_beta", c.s_beta},
      {"s_gamma", c.s_gamma},
      {"coef_scheme", enum_name(kSchemeNames, c.coef_scheme)},
      {"coef_positions", enum_name(kPositionNames, c.positions)},
      {"target_var_f", c.target_var_f},
      {"target_var_g", c.target_var_g},
      {"error_corr", c.error_corr},
      {"model_f", enum_name(kModelNames, c.model_f)},
      {"model_g", enum_name(kModelNames, c.model_g)},
      {"fit_f", enum_name(kFamilyNames, c.fit_f)},
      {"fit_g", enum_name(kFamilyNames, c.fit_g)},
      {"estimator", enum_name(kEstimatorNames, c.estimator)},
      {"truth", enum_name(kTruthNames, c.truth_kind)},
      {"intercept_f", c.intercept_f},
      {"intercept_g", c.intercept_g},
      {"alpha", c.alpha},
      {"replications", c.replications},
      {"seed", c.seed},
      {"fit",
       ordered_json{
           {"n_lambda", c.fit.n_lambda},
           {"lambda_min_ratio", c.fit.lambda_min_ratio},
           {"cd_tolerance", c.fit.cd_tolerance},
           {"max_sweeps", c.fit.max_sweeps},
           {"cv_folds", c.fit.cv_folds},
           {"selection_rule", enum_name(kSelectionNames, c.fit.selection_rule)},
           {"penalize_intercept", c.fit.penalize_intercept}}}};
}

namespace {

template <typename T>
void read_field(const ordered_json& doc, const std::string& key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::config, "config field '" + key + "' has the wrong type");
  }
}

template <typename E, std::size_t N>
void read_enum(const ordered_json& doc, const std::string& key,
               const NamedValue<E> (&table)[N], E& out) {
  if (!doc.contains(key)) return;
  if (!doc.at(key).is_string()) {
    fail(ErrorKind::config, "config field '" + key + "' must be a string");
  }
  out = enum_value(table, doc.at(key).get<std::string>(), key);
}

}  // namespace

SimulationConfig config_from_json(const ordered_json& doc) {
  static const char* known[] = {
      "n_y",        "n_z",          "overlap",      "n_overlap",
      "p",          "design",       "rho",          "maf",
      "s_beta",     "s_gamma",      "coef_scheme",  "coef_positions",
      "target_var_f", "target_var_g", "error_corr", "model_f",
      "model_g",    "fit_f",        "fit_g",        "estimator",
      "truth",      "intercept_f",  "intercept_g",  "alpha",
      "replications", "seed",       "fit",          "name"};
  if (!doc.is_object()) fail(ErrorKind::config, "config must be a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || (it.key() == k);
    if (!ok) fail(ErrorKind::config, "config field '" + it.key() +
                                         "' is not recognised");
  }

  SimulationConfig c;
  read_field(doc, "n_y", c.n_y);
  read_field(doc, "n_z", c.n_z);
  read_enum(doc, "overlap", kOverlapNames, c.overlap);
  read_field(doc, "n_overlap", c.n_overlap);
  read_field(doc, "p", c.p);
  read_enum(doc, "design", kDesignNames, c.design);
  read_field(doc, "rho", c.rho);
  read_field(doc, "maf", c.maf);
  read_field(doc, "s_beta", c.s_beta);
  read_field(doc, "s_gamma", c.s_gamma);
  read_enum(doc, "coef_scheme", kSchemeNames, c.coef_scheme);
  read_enum(doc, "coef_positions", kPositionNames, c.positions);
  read_field(doc, "target_var_f", c.target_var_f);
  read_field(doc, "target_var_g", c.target_var_g);
  read_field(doc, "error_corr", c.error_corr);
  read_enum(doc, "model_f", kModelNames, c.model_f);
  read_enum(doc, "model_g", kModelNames, c.model_g);
  read_enum(doc, "fit_f", kFamilyNames, c.fit_f);
  read_enum(doc, "fit_g", kFamilyNames, c.fit_g);
  read_enum(doc, "estimator", kEstimatorNames, c.estimator);
  read_enum(doc, "truth", kTruthNames, c.truth_kind);
  read_field(doc, "intercept_f", c.intercept_f);
  read_field(doc, "intercept_g", c.intercept_g);
  read_field(doc, "alpha", c.alpha);
  read_field(doc, "replications", c.replications);
  read_field(doc, "seed", c.seed);
  if (doc.contains("fit")) {
    const auto& fit = doc.at("fit");
    if (!fit.is_object()) {
      fail(ErrorKind::config, "config field 'fit' must be an object");
    }
    static const char* fit_known[] = {"n_lambda",   "lambda_min_ratio",
                                      "cd_tolerance", "max_sweeps",
                                      "cv_folds",   "selection_rule",
                                      "penalize_intercept"};
    for (auto it = fit.begin(); it != fit.end(); ++it) {
      bool ok = false;
      for (const char* k : fit_known) ok = ok || (it.key() == k);
      if (!ok) fail(ErrorKind::config, "config field 'fit." + it.key() +
                                           "' is not recognised");
    }
    read_field(fit, "n_lambda", c.fit.n_lambda);
    read_field(fit, "lambda_min_ratio", c.fit.lambda_min_ratio);
    read_field(fit, "cd_tolerance", c.fit.cd_tolerance);
    read_field(fit, "max_sweeps", c.fit.max_sweeps);
    read_field(fit, "cv_folds", c.fit.cv_folds);
    read_enum(fit, "selection_rule", kSelectionNames, c.fit.selection_rule);
    read_field(fit, "penalize_intercept", c.fit.penalize_intercept);
  }
  c.validate();
  return c;
}

ordered_json to_json(const CoverageReport& r, const SimulationConfig& config) {
  return ordered_json{
      {"empirical_coverage", r.empirical_coverage},
      {"mean_se", r.mean_se},
      {"mean_estimate", r.mean_estimate},
      {"truth", r.truth.value},
      {"truth_provenance", r.truth.provenance},
      {"oracle_se", r.truth.oracle_se},
      {"replications", static_cast<int>(r.replicates.size())},
      {"config", config_to_json(config)}};
}

void write_replicates_csv(const CoverageReport& report,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  out << "seed,estimate,se,ci_lower,ci_upper,covered\n";
  char buf[256];
  for (const auto& rec : report.replicates) {
    std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g,%.17g,%d\n",
                  static_cast<unsigned long long>(rec.seed), rec.estimate,
                  rec.se, rec.ci_lower, rec.ci_upper, rec.covered ? 1 : 0);
    out << buf;
  }
  if (!out) fail(ErrorKind::io, "short write to '" + path + "'");
}

void validate_against_schema(const ordered_json& doc,
                             const ordered_json& schema,
                             const std::string& where) {
  if (schema.contains("type")) {
    const std::string type = schema.at("type").get<std::string>();
    bool ok = false;
    if (type == "object") ok = doc.is_object();
    else if (type == "array") ok = doc.is_array();
    else if (type == "string") ok = doc.is_string();
    else if (type == "number") ok = doc.is_number();
    else if (type == "integer") ok = doc.is_number_integer();
    else if (type == "boolean") ok = doc.is_boolean();
    else fail(ErrorKind::config, "schema: unsupported type '" + type + "'");
    if (!ok) {
      fail(ErrorKind::parse,
           where + ": expected " + type + ", got " + std::string(doc.type_name()));
    }
  }
  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& v : schema.at("enum")) ok = ok || (v == doc);
    if (!ok) fail(ErrorKind::parse, where + ": value not in enum");
  }
  if (schema.contains("required")) {
    for (const auto& name : schema.at("required")) {
      if (!doc.contains(name.get<std::string>())) {
        fail(ErrorKind::parse,
             where + ": missing required field '" + name.get<std::string>() +
                 "'");
      }
    }
  }
  if (schema.contains("properties") && doc.is_object()) {
    for (const auto& [name, sub] : schema.at("properties").items()) {
      if (doc.contains(name)) {
        validate_against_schema(doc.at(name), sub, where + "." + name);
      }
    }
  }
  if (schema.contains("items") && doc.is_array()) {
    int i = 0;
    for (const auto& el : doc) {
      validate_against_schema(el, schema.at("items"),
                              where + "[" + std::to_string(i++) + "]");
    }
  }
}

}  // namespace gencov
