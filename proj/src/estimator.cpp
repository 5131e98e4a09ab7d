#include "gencov/estimator.hpp"

#include <cmath>

#include "gencov/mathstats.hpp"
#include "gencov/rng.hpp"

namespace gencov {

std::string mode_name(EstimatorMode mode) {
  switch (mode) {
    case EstimatorMode::general: return "general";
    case EstimatorMode::narrow_sense: return "narrow-sense";
    case EstimatorMode::case_control: return "case-control";
    case EstimatorMode::cross_fitted: return "cross-fitted";
  }
  return "general";
}

namespace {

struct Parts {
  Eigen::VectorXd fitted_f;  // length N
  Eigen::VectorXd fitted_g;
  Eigen::VectorXd eps;  // y residuals, idx_y order
  Eigen::VectorXd v;    // z residuals, idx_z order
};

void validate_inputs(const EstimatorInputs& in) {
  const auto& idx = in.index;
  if (in.covariates.rows() != idx.n_union) {
    fail(ErrorKind::shape, "estimator: union matrix has wrong row count");
  }
  if (idx.n_union == 0) fail(ErrorKind::data, "estimator: empty data");
  if (in.model_f.coefficients.size() != in.covariates.cols() ||
      in.model_g.coefficients.size() != in.covariates.cols()) {
    fail(ErrorKind::shape, "estimator: model dimension mismatch");
  }
  if (in.y.size() != idx.n_y || in.z.size() != idx.n_z) {
    fail(ErrorKind::shape, "estimator: outcome length mismatch");
  }
}

Parts compute_parts(const EstimatorInputs& in) {
  Parts parts;
  parts.fitted_f = predict_mean(in.model_f, in.covariates);
  parts.fitted_g = predict_mean(in.model_g, in.covariates);
  parts.eps.resize(in.index.n_y);
  for (int k = 0; k < in.index.n_y; ++k) {
    parts.eps[k] = in.y[k] - parts.fitted_f[in.index.idx_y[k]];
  }
  parts.v.resize(in.index.n_z);
  for (int k = 0; k < in.index.n_z; ++k) {
    parts.v[k] = in.z[k] - parts.fitted_g[in.index.idx_z[k]];
  }
  return parts;
}

std::pair<double, double> means_from_parts(const Parts& parts) {
  const double mu_f = parts.fitted_f.mean() + parts.eps.mean();
  const double mu_g = parts.fitted_g.mean() + parts.v.mean();
  return {mu_f, mu_g};
}

Eigen::VectorXd delta_from_parts(const EstimatorInputs& in, const Parts& parts,
                                 double mu_f, double mu_g) {
  const auto& idx = in.index;
  const double inv_n = 1.0 / idx.n_union;
  const double inv_ny = 1.0 / idx.n_y;
  const double inv_nz = 1.0 / idx.n_z;
  Eigen::VectorXd delta(idx.n_union);
  for (int i = 0; i < idx.n_union; ++i) {
    delta[i] = inv_n * (parts.fitted_f[i] - mu_f) * (parts.fitted_g[i] - mu_g);
  }
  for (int k = 0; k < idx.n_y; ++k) {
    const int i = idx.idx_y[k];
    delta[i] += inv_ny * parts.eps[k] * (parts.fitted_g[i] - mu_g);
  }
  for (int k = 0; k < idx.n_z; ++k) {
    const int i = idx.idx_z[k];
    delta[i] += inv_nz * parts.v[k] * (parts.fitted_f[i] - mu_f);
  }
  return delta;
}

}  // namespace

std::pair<double, double> estimate_means(const EstimatorInputs& inputs) {
  validate_inputs(inputs);
  return means_from_parts(compute_parts(inputs));
}

Eigen::VectorXd delta_terms(const EstimatorInputs& inputs, double mu_f,
                            double mu_g) {
  validate_inputs(inputs);
  return delta_from_parts(inputs, compute_parts(inputs), mu_f, mu_g);
}

EstimateResult estimate_I(const EstimatorInputs& inputs) {
  validate_inputs(inputs);
  const Parts parts = compute_parts(inputs);
  const auto [mu_f, mu_g] = means_from_parts(parts);
  const auto& idx = inputs.index;

  double cross = parts.fitted_f.dot(parts.fitted_g) / idx.n_union;
  double eps_term = 0.0;
  for (int k = 0; k < idx.n_y; ++k) {
    eps_term += parts.eps[k] * parts.fitted_g[idx.idx_y[k]];
  }
  eps_term /= idx.n_y;
  double v_term = 0.0;
  for (int k = 0; k < idx.n_z; ++k) {
    v_term += parts.v[k] * parts.fitted_f[idx.idx_z[k]];
  }
  v_term /= idx.n_z;

  EstimateResult res;
  res.I_hat = cross + eps_term + v_term - mu_f * mu_g;
  res.mu_f = mu_f;
  res.mu_g = mu_g;
  res.delta = delta_from_parts(inputs, parts, mu_f, mu_g);
  return res;
}

VarianceCi variance_and_ci(double I_hat, const Eigen::VectorXd& delta,
                           int n_union, double alpha) {
  if (delta.size() != n_union) {
    fail(ErrorKind::shape, "variance: delta length mismatch");
  }
  if (n_union < 2) {
    fail(ErrorKind::degenerate, "variance: need at least two samples");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    fail(ErrorKind::config, "alpha must lie in (0,1)");
  }
  const double center = I_hat / n_union;
  const double sigma2 = (delta.array() - center).square().sum();
  VarianceCi out;
  out.se = std::sqrt(sigma2);
  out.degenerate = (out.se == 0.0);
  const double half = normal_quantile(1.0 - alpha / 2.0) * out.se;
  out.ci_lower = I_hat - half;
  out.ci_upper = I_hat + half;
  return out;
}

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& X,
                            const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = X.row(rows[k]);
  }
  return out;
}

CovarianceReport assemble_report(const EstimateResult& est,
                                 const VarianceCi& vc, const IndexSets& idx,
                                 double alpha, std::uint64_t seed,
                                 EstimatorMode mode) {
  CovarianceReport rep;
  rep.estimate = est.I_hat;
  rep.mu_f = est.mu_f;
  rep.mu_g = est.mu_g;
  rep.se = vc.se;
  rep.ci_lower = vc.ci_lower;
  rep.ci_upper = vc.ci_upper;
  rep.alpha = alpha;
  rep.n_y = idx.n_y;
  rep.n_z = idx.n_z;
  rep.n_overlap = idx.n_o;
  rep.n_union = idx.n_union;
  rep.mode = mode;
  rep.seed = seed;
  rep.degenerate_se = vc.degenerate;
  return rep;
}

}  // namespace

CovarianceReport run_pipeline_aligned(const AlignedData& data,
                                      GlmFamily family_f, GlmFamily family_g,
                                      const FitConfig& fit_config, double alpha,
                                      std::uint64_t seed, EstimatorMode mode) {
  if (data.index.n_union == 0) fail(ErrorKind::data, "pipeline: empty data");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    fail(ErrorKind::config, "alpha must lie in (0,1)");
  }

  FitConfig cfg_f = fit_config;
  cfg_f.seed = derive_seed(seed, 1);
  FitConfig cfg_g = fit_config;
  cfg_g.seed = derive_seed(seed, 2);

  const Eigen::MatrixXd X_y = gather_rows(data.covariates, data.index.idx_y);
  const CvFit fit_f = fit_cv(X_y, data.y, family_f, cfg_f);
  const Eigen::MatrixXd X_z = gather_rows(data.covariates, data.index.idx_z);
  const CvFit fit_g = fit_cv(X_z, data.z, family_g, cfg_g);

  const EstimatorInputs inputs{data.covariates, data.index, fit_f.model,
                               fit_g.model,      data.y,    data.z};
  const EstimateResult est = estimate_I(inputs);
  const VarianceCi vc =
      variance_and_ci(est.I_hat, est.delta, data.index.n_union, alpha);

  CovarianceReport rep = assemble_report(est, vc, data.index, alpha, seed, mode);
  rep.lambda_f = fit_f.model.lambda;
  rep.lambda_g = fit_g.model.lambda;
  rep.support_f = fit_f.model.support_size();
  rep.support_g = fit_g.model.support_size();
  return rep;
}

CovarianceReport run_pipeline(const Dataset& ds_y, const Dataset& ds_z,
                              GlmFamily family_f, GlmFamily family_g,
                              const FitConfig& fit_config, double alpha,
                              std::uint64_t seed, EstimatorMode mode) {
  const AlignedData data = align_samples(ds_y, ds_z);
  return run_pipeline_aligned(data, family_f, family_g, fit_config, alpha,
                              seed, mode);
}

AlignedData subset_aligned(const AlignedData& data,
                           const std::vector<char>& member) {
  const auto& idx = data.index;
  AlignedData out;

  std::vector<int> new_pos(idx.n_union, -1);
  std::vector<int> picked;
  for (int i = 0; i < idx.n_union; ++i) {
    if (member[i]) {
      new_pos[i] = static_cast<int>(picked.size());
      picked.push_back(i);
    }
  }
  out.covariates = gather_rows(data.covariates, picked);
  out.ids.reserve(picked.size());
  for (int i : picked) out.ids.push_back(data.ids[i]);

  std::vector<double> y_sub, z_sub;
  for (int k = 0; k < idx.n_y; ++k) {
    const int i = idx.idx_y[k];
    if (member[i]) {
      out.index.idx_y.push_back(new_pos[i]);
      y_sub.push_back(data.y[k]);
    }
  }
  for (int k = 0; k < idx.n_z; ++k) {
    const int i = idx.idx_z[k];
    if (member[i]) {
      out.index.idx_z.push_back(new_pos[i]);
      z_sub.push_back(data.z[k]);
    }
  }
  for (int i : idx.idx_overlap) {
    if (member[i]) out.index.idx_overlap.push_back(new_pos[i]);
  }
  out.index.n_y = static_cast<int>(out.index.idx_y.size());
  out.index.n_z = static_cast<int>(out.index.idx_z.size());
  out.index.n_o = static_cast<int>(out.index.idx_overlap.size());
  out.index.n_union = static_cast<int>(picked.size());
  out.y = Eigen::Map<Eigen::VectorXd>(y_sub.data(),
                                      static_cast<Eigen::Index>(y_sub.size()));
  out.z = Eigen::Map<Eigen::VectorXd>(z_sub.data(),
                                      static_cast<Eigen::Index>(z_sub.size()));
  return out;
}

namespace {

// Half assignment over union members: overlap individuals are split first,
// then each study's remainder is topped up so both halves carry
// floor(n/2) / ceil(n/2) samples of each study.
std::vector<char> split_halves(const IndexSets& idx, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<char> in_a(idx.n_union, 0);

  std::vector<int> overlap = idx.idx_overlap;
  rng.shuffle(overlap);
  const int o_half = idx.n_o / 2;
  for (int k = 0; k < o_half; ++k) in_a[overlap[k]] = 1;

  std::vector<char> is_overlap(idx.n_union, 0);
  for (int i : idx.idx_overlap) is_overlap[i] = 1;

  std::vector<int> y_only, z_only;
  for (int i : idx.idx_y) {
    if (!is_overlap[i]) y_only.push_back(i);
  }
  for (int i : idx.idx_z) {
    if (!is_overlap[i]) z_only.push_back(i);
  }
  rng.shuffle(y_only);
  rng.shuffle(z_only);
  const int want_y = idx.n_y / 2 - o_half;
  for (int k = 0; k < want_y; ++k) in_a[y_only[k]] = 1;
  const int want_z = idx.n_z / 2 - o_half;
  for (int k = 0; k < want_z; ++k) in_a[z_only[k]] = 1;
  return in_a;
}

struct HalfEstimate {
  double I_hat = 0.0;
  double sigma2 = 0.0;
  double mu_f = 0.0, mu_g = 0.0;
  double lambda_f = 0.0, lambda_g = 0.0;
  int support_f = 0, support_g = 0;
};

HalfEstimate fit_and_evaluate(const AlignedData& fit_half,
                              const AlignedData& eval_half, GlmFamily family_f,
                              GlmFamily family_g, const FitConfig& fit_config,
                              std::uint64_t seed) {
  if (fit_half.index.n_y < 2 || fit_half.index.n_z < 2 ||
      eval_half.index.n_y < 1 || eval_half.index.n_z < 1) {
    fail(ErrorKind::degenerate, "cross-fit: half-study too small");
  }
  FitConfig cfg_f = fit_config;
  cfg_f.seed = derive_seed(seed, 1);
  FitConfig cfg_g = fit_config;
  cfg_g.seed = derive_seed(seed, 2);

  const Eigen::MatrixXd X_y =
      gather_rows(fit_half.covariates, fit_half.index.idx_y);
  const CvFit fit_f = fit_cv(X_y, fit_half.y, family_f, cfg_f);
  const Eigen::MatrixXd X_z =
      gather_rows(fit_half.covariates, fit_half.index.idx_z);
  const CvFit fit_g = fit_cv(X_z, fit_half.z, family_g, cfg_g);

  const EstimatorInputs inputs{eval_half.covariates, eval_half.index,
                               fit_f.model,          fit_g.model,
                               eval_half.y,          eval_half.z};
  const EstimateResult est = estimate_I(inputs);
  if (eval_half.index.n_union < 2) {
    fail(ErrorKind::degenerate, "cross-fit: evaluation half too small");
  }
  const double center = est.I_hat / eval_half.index.n_union;
  HalfEstimate he;
  he.I_hat = est.I_hat;
  he.sigma2 = (est.delta.array() - center).square().sum();
  he.mu_f = est.mu_f;
  he.mu_g = est.mu_g;
  he.lambda_f = fit_f.model.lambda;
  he.lambda_g = fit_g.model.lambda;
  he.support_f = fit_f.model.support_size();
  he.support_g = fit_g.model.support_size();
  return he;
}

}  // namespace

CovarianceReport run_cross_fitted(const AlignedData& data, GlmFamily family_f,
                                  GlmFamily family_g,
                                  const FitConfig& fit_config, double alpha,
                                  std::uint64_t split_seed) {
  if (data.index.n_y < 4 || data.index.n_z < 4) {
    fail(ErrorKind::degenerate,
         "cross-fit: each study needs at least 4 samples");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    fail(ErrorKind::config, "alpha must lie in (0,1)");
  }

  const std::vector<char> in_a =
      split_halves(data.index, derive_seed(split_seed, 17));
  std::vector<char> in_b(in_a.size());
  for (std::size_t i = 0; i < in_a.size(); ++i) in_b[i] = !in_a[i];

  const AlignedData half_a = subset_aligned(data, in_a);
  const AlignedData half_b = subset_aligned(data, in_b);

  const HalfEstimate e1 = fit_and_evaluate(half_a, half_b, family_f, family_g,
                                           fit_config, derive_seed(split_seed, 1));
  const HalfEstimate e2 = fit_and_evaluate(half_b, half_a, family_f, family_g,
                                           fit_config, derive_seed(split_seed, 2));

  CovarianceReport rep;
  rep.estimate = 0.5 * (e1.I_hat + e2.I_hat);
  rep.mu_f = 0.5 * (e1.mu_f + e2.mu_f);
  rep.mu_g = 0.5 * (e1.mu_g + e2.mu_g);
  rep.se = 0.5 * std::sqrt(e1.sigma2 + e2.sigma2);
  const double half = normal_quantile(1.0 - alpha / 2.0) * rep.se;
  rep.ci_lower = rep.estimate - half;
  rep.ci_upper = rep.estimate + half;
  rep.alpha = alpha;
  rep.n_y = data.index.n_y;
  rep.n_z = data.index.n_z;
  rep.n_overlap = data.index.n_o;
  rep.n_union = data.index.n_union;
  rep.mode = EstimatorMode::cross_fitted;
  rep.lambda_f = e1.lambda_f;
  rep.lambda_g = e1.lambda_g;
  rep.support_f = e1.support_f;
  rep.support_g = e1.support_g;
  rep.seed = split_seed;
  rep.degenerate_se = (rep.se == 0.0);
  rep.half_estimate_1 = e1.I_hat;
  rep.half_estimate_2 = e2.I_hat;
  rep.half_sigma2_1 = e1.sigma2;
  rep.half_sigma2_2 = e2.sigma2;
  return rep;
}

}  // namespace gencov
