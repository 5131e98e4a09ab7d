#include "gencov/case_control.hpp"

#include <cmath>

#include "gencov/mathstats.hpp"
#include "gencov/rng.hpp"

namespace gencov {

double correct_intercept(double beta0_hat, const CaseControlSpec& spec) {
  spec.validate();
  return beta0_hat +
         std::log(spec.prevalence_p1 * spec.pi0() / (spec.p0() * spec.pi1));
}

FittedGlm correct_intercept(const FittedGlm& model,
                            const CaseControlSpec& spec) {
  FittedGlm out = model;
  out.intercept = correct_intercept(model.intercept, spec);
  return out;
}

namespace {

void check_disjoint(const IndexSets& index) {
  if (index.n_o != 0) {
    fail(ErrorKind::unsupported,
         "case-control: the case-control study and the cohort study must be "
         "disjoint");
  }
}

}  // namespace

Eigen::VectorXd compute_weights(const IndexSets& index,
                                const Eigen::VectorXd& y,
                                const CaseControlSpec& spec) {
  spec.validate();
  check_disjoint(index);
  if (y.size() != index.n_y) {
    fail(ErrorKind::shape, "case-control: outcome length mismatch");
  }
  Eigen::VectorXd w = Eigen::VectorXd::Ones(index.n_union);
  for (int k = 0; k < index.n_y; ++k) {
    if (y[k] != 0.0 && y[k] != 1.0) {
      fail(ErrorKind::data, "case-control: outcome must be 0/1");
    }
    w[index.idx_y[k]] =
        (y[k] == 1.0) ? spec.case_weight() : spec.control_weight();
  }
  return w;
}

WeightedReport estimate_weighted(const EstimatorInputs& inputs,
                                 const CaseControlSpec& spec, double alpha) {
  spec.validate();
  check_disjoint(inputs.index);
  if (!(alpha > 0.0 && alpha < 1.0)) {
    fail(ErrorKind::config, "alpha must lie in (0,1)");
  }
  const auto& idx = inputs.index;
  const Eigen::VectorXd w = compute_weights(idx, inputs.y, spec);

  const Eigen::VectorXd fitted_f = predict_mean(inputs.model_f, inputs.covariates);
  const Eigen::VectorXd fitted_g = predict_mean(inputs.model_g, inputs.covariates);
  Eigen::VectorXd eps(idx.n_y), v(idx.n_z);
  for (int k = 0; k < idx.n_y; ++k) {
    eps[k] = inputs.y[k] - fitted_f[idx.idx_y[k]];
  }
  for (int k = 0; k < idx.n_z; ++k) {
    v[k] = inputs.z[k] - fitted_g[idx.idx_z[k]];
  }

  const double inv_n = 1.0 / idx.n_union;
  const double inv_ny = 1.0 / idx.n_y;
  const double inv_nz = 1.0 / idx.n_z;

  double mu_f = w.cwiseProduct(fitted_f).sum() * inv_n;
  double mu_g = w.cwiseProduct(fitted_g).sum() * inv_n;
  for (int k = 0; k < idx.n_y; ++k) {
    mu_f += inv_ny * w[idx.idx_y[k]] * eps[k];
  }
  for (int k = 0; k < idx.n_z; ++k) {
    mu_g += inv_nz * w[idx.idx_z[k]] * v[k];
  }

  double I_check = 0.0;
  for (int i = 0; i < idx.n_union; ++i) {
    I_check += inv_n * w[i] * fitted_f[i] * fitted_g[i];
  }
  for (int k = 0; k < idx.n_y; ++k) {
    const int i = idx.idx_y[k];
    I_check += inv_ny * w[i] * eps[k] * fitted_g[i];
  }
  for (int k = 0; k < idx.n_z; ++k) {
    const int i = idx.idx_z[k];
    I_check += inv_nz * w[i] * v[k] * fitted_f[i];
  }
  I_check -= mu_f * mu_g;

  // Decomposition terms, centered at the weighted means.
  Eigen::VectorXd delta(idx.n_union);
  for (int i = 0; i < idx.n_union; ++i) {
    delta[i] = inv_n * (fitted_f[i] - mu_f) * (fitted_g[i] - mu_g);
  }
  for (int k = 0; k < idx.n_y; ++k) {
    const int i = idx.idx_y[k];
    delta[i] += inv_ny * eps[k] * (fitted_g[i] - mu_g);
  }
  for (int k = 0; k < idx.n_z; ++k) {
    const int i = idx.idx_z[k];
    delta[i] += inv_nz * v[k] * (fitted_f[i] - mu_f);
  }

  // Empirical component variances. The single centering constant I/N
  // mirrors the unweighted variance estimator, and makes the pi1 = p1 case
  // reduce exactly to it.
  const double center = I_check / idx.n_union;
  double s2_y0 = 0.0, s2_y1 = 0.0, s2_z = 0.0;
  int n_y0 = 0, n_y1 = 0;
  for (int k = 0; k < idx.n_y; ++k) {
    const double d = delta[idx.idx_y[k]] - center;
    if (inputs.y[k] == 1.0) {
      s2_y1 += d * d;
      ++n_y1;
    } else {
      s2_y0 += d * d;
      ++n_y0;
    }
  }
  for (int k = 0; k < idx.n_z; ++k) {
    const double d = delta[idx.idx_z[k]] - center;
    s2_z += d * d;
  }
  if (n_y0 < 2 || n_y1 < 2 || idx.n_z < 2) {
    fail(ErrorKind::degenerate,
         "case-control: each variance component needs at least two samples");
  }

  const double cw = spec.control_weight();
  const double aw = spec.case_weight();
  const double sigma2 = cw * cw * s2_y0 + aw * aw * s2_y1 + s2_z;

  WeightedReport rep;
  rep.base.estimate = I_check;
  rep.base.mu_f = mu_f;
  rep.base.mu_g = mu_g;
  rep.base.se = std::sqrt(sigma2);
  const double half = normal_quantile(1.0 - alpha / 2.0) * rep.base.se;
  rep.base.ci_lower = I_check - half;
  rep.base.ci_upper = I_check + half;
  rep.base.alpha = alpha;
  rep.base.n_y = idx.n_y;
  rep.base.n_z = idx.n_z;
  rep.base.n_overlap = 0;
  rep.base.n_union = idx.n_union;
  rep.base.mode = EstimatorMode::case_control;
  rep.base.degenerate_se = (rep.base.se == 0.0);
  rep.beta0_star = inputs.model_f.intercept;
  rep.sigma2_y0 = s2_y0;
  rep.sigma2_y1 = s2_y1;
  rep.sigma2_z = s2_z;
  rep.control_weight = cw;
  rep.case_weight = aw;
  rep.prevalence = spec.prevalence_p1;
  rep.case_fraction = spec.pi1;
  return rep;
}

WeightedReport run_case_control(const AlignedData& data, GlmFamily family_g,
                                const FitConfig& fit_config, double prevalence,
                                std::optional<double> pi1, double alpha,
                                std::uint64_t seed) {
  check_disjoint(data.index);
  if (data.index.n_y == 0 || data.index.n_z == 0) {
    fail(ErrorKind::data, "case-control: empty study");
  }

  CaseControlSpec spec;
  spec.prevalence_p1 = prevalence;
  spec.pi1 = pi1 ? *pi1 : data.y.mean();
  spec.validate();

  FitConfig cfg_f = fit_config;
  cfg_f.seed = derive_seed(seed, 1);
  FitConfig cfg_g = fit_config;
  cfg_g.seed = derive_seed(seed, 2);

  Eigen::MatrixXd X_y(data.index.n_y, data.covariates.cols());
  for (int k = 0; k < data.index.n_y; ++k) {
    X_y.row(k) = data.covariates.row(data.index.idx_y[k]);
  }
  const CvFit fit_f = fit_cv(X_y, data.y, GlmFamily{Family::logistic}, cfg_f);
  const FittedGlm corrected = correct_intercept(fit_f.model, spec);

  Eigen::MatrixXd X_z(data.index.n_z, data.covariates.cols());
  for (int k = 0; k < data.index.n_z; ++k) {
    X_z.row(k) = data.covariates.row(data.index.idx_z[k]);
  }
  const CvFit fit_g = fit_cv(X_z, data.z, family_g, cfg_g);

  const EstimatorInputs inputs{data.covariates, data.index, corrected,
                               fit_g.model,     data.y,     data.z};
  WeightedReport rep = estimate_weighted(inputs, spec, alpha);
  rep.base.lambda_f = fit_f.model.lambda;
  rep.base.lambda_g = fit_g.model.lambda;
  rep.base.support_f = fit_f.model.support_size();
  rep.base.support_g = fit_g.model.support_size();
  rep.base.seed = seed;
  return rep;
}

}  // namespace gencov
