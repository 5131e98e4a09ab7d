#include "gencov/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "gencov/case_control.hpp"
#include "gencov/mathstats.hpp"
#include "gencov/parallel.hpp"

namespace gencov {

namespace {

constexpr std::uint64_t kCoefStream = 0x90000001ULL;
constexpr std::uint64_t kRescaleStream = 0x90000002ULL;
constexpr std::uint64_t kOracleStream = 0x90000003ULL;
constexpr std::uint64_t kPrevalenceStream = 0x90000004ULL;

const double kPi = 3.14159265358979323846;

double m1_value(const double* x) {
  return -5.0 + 2.0 * std::sin(kPi * x[0] * x[1]) +
         4.0 * (x[2] - 0.5) * (x[2] - 0.5) + 2.0 * x[4] + x[5];
}

double m2_value(const double* x) {
  return 2.0 * std::sin(kPi * x[0] / 2.0) * x[1] + 0.4 * x[2] * x[2] * x[2] +
         2.0 * x[4] + x[5];
}

// E[h(Z)] for Z ~ N(0, sd^2), composite Simpson on [-12 sd, 12 sd].
double gauss_expectation(const std::function<double(double)>& h, double sd) {
  const int segments = 4000;
  const double lo = -12.0 * sd, hi = 12.0 * sd;
  const double step = (hi - lo) / segments;
  double acc = 0.0;
  for (int i = 0; i <= segments; ++i) {
    const double x = lo + step * i;
    const double wgt = (i == 0 || i == segments) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += wgt * h(x) * normal_pdf(x / sd) / sd;
  }
  return acc * step / 3.0;
}

}  // namespace

void SimulationConfig::validate() const {
  if (n_y < 1 || n_z < 1) fail(ErrorKind::config, "n_y/n_z must be positive");
  if (p < 1) fail(ErrorKind::config, "p must be positive");
  if (s_beta < 0 || s_beta > p) fail(ErrorKind::config, "s_beta out of range");
  if (s_gamma < 0 || s_gamma > p) {
    fail(ErrorKind::config, "s_gamma out of range");
  }
  if (!(std::abs(rho) < 1.0)) fail(ErrorKind::config, "|rho| must be < 1");
  if (!(std::abs(error_corr) < 1.0)) {
    fail(ErrorKind::config, "|error_corr| must be < 1");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    fail(ErrorKind::config, "alpha must lie in (0,1)");
  }
  if (replications < 1) fail(ErrorKind::config, "replications must be >= 1");
  if (overlap == OverlapMode::full && n_y != n_z) {
    fail(ErrorKind::config, "full overlap requires n_y == n_z");
  }
  if (overlap == OverlapMode::partial &&
      (n_overlap < 0 || n_overlap > std::min(n_y, n_z))) {
    fail(ErrorKind::config, "n_overlap out of range");
  }
  if (design == DesignKind::synthetic_genotype &&
      !(maf > 0.0 && maf < 0.5)) {
    fail(ErrorKind::config, "maf must lie in (0, 0.5)");
  }
  if ((model_f == TrueModel::m1 || model_f == TrueModel::m2 ||
       model_g == TrueModel::m1 || model_g == TrueModel::m2) &&
      p < 6) {
    fail(ErrorKind::config, "m1/m2 models require p >= 6");
  }
  if (truth_kind == TruthKind::narrow_sense &&
      (fit_f != Family::linear || fit_g != Family::linear)) {
    fail(ErrorKind::config,
         "narrow-sense mode requires linear working models");
  }
  if (truth_kind == TruthKind::narrow_sense &&
      design != DesignKind::gaussian_ar1) {
    fail(ErrorKind::config,
         "narrow-sense truth is only defined for the gaussian-ar1 design");
  }
  if (estimator == HarnessEstimator::case_control) {
    if (model_f != TrueModel::logistic) {
      fail(ErrorKind::config,
           "case-control simulation requires a logistic model_f");
    }
    if (overlap != OverlapMode::disjoint) {
      fail(ErrorKind::config, "case-control simulation requires disjoint studies");
    }
    if (n_y % 2 != 0) {
      fail(ErrorKind::config,
           "case-control simulation requires even n_y (n_y/2 cases and "
           "controls)");
    }
    if (fit_f != Family::logistic) {
      fail(ErrorKind::config, "case-control fits a logistic working model");
    }
  }
}

Eigen::MatrixXd sample_ar1_design(int n, int p, double rho, Rng& rng) {
  Eigen::MatrixXd X(n, p);
  const double scale = std::sqrt(1.0 - rho * rho);
  for (int i = 0; i < n; ++i) {
    double prev = rng.normal();
    X(i, 0) = prev;
    for (int j = 1; j < p; ++j) {
      prev = rho * prev + scale * rng.normal();
      X(i, j) = prev;
    }
  }
  return X;
}

Eigen::MatrixXd sample_synthetic_genotypes(int n, int p, double maf,
                                           double rho, Rng& rng) {
  if (!(maf > 0.0 && maf < 0.5)) {
    fail(ErrorKind::config, "maf must lie in (0, 0.5)");
  }
  const double threshold = normal_quantile(1.0 - maf);
  const double scale = std::sqrt(1.0 - rho * rho);
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i) {
    double h1 = rng.normal();
    double h2 = rng.normal();
    X(i, 0) = (h1 > threshold ? 1.0 : 0.0) + (h2 > threshold ? 1.0 : 0.0);
    for (int j = 1; j < p; ++j) {
      h1 = rho * h1 + scale * rng.normal();
      h2 = rho * h2 + scale * rng.normal();
      X(i, j) = (h1 > threshold ? 1.0 : 0.0) + (h2 > threshold ? 1.0 : 0.0);
    }
  }
  return X;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_correlated_errors(
    int n, double corr, Rng& rng) {
  if (!(std::abs(corr) < 1.0)) {
    fail(ErrorKind::config, "|error correlation| must be < 1");
  }
  Eigen::VectorXd a(n), b(n);
  for (int i = 0; i < n; ++i) {
    const auto [u, v] = rng.normal_pair(corr);
    a[i] = u;
    b[i] = v;
  }
  return {a, b};
}

Eigen::VectorXd make_coefficients(int p, int s, CoefScheme scheme,
                                  CoefPositions positions, Rng& rng) {
  if (s > p) fail(ErrorKind::config, "sparsity exceeds dimension");
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  std::vector<int> where(s);
  if (positions == CoefPositions::first_s) {
    std::iota(where.begin(), where.end(), 0);
  } else {
    std::vector<int> all(p);
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(all);
    where.assign(all.begin(), all.begin() + s);
    std::sort(where.begin(), where.end());
  }
  for (int j : where) {
    beta[j] = (scheme == CoefScheme::ones) ? 1.0 : rng.normal();
  }
  return beta;
}

double ar1_quadratic_form(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                          double rho) {
  std::vector<int> sa, sb;
  for (int j = 0; j < a.size(); ++j) {
    if (a[j] != 0.0) sa.push_back(j);
  }
  for (int j = 0; j < b.size(); ++j) {
    if (b[j] != 0.0) sb.push_back(j);
  }
  double acc = 0.0;
  for (int j : sa) {
    for (int k : sb) {
      acc += a[j] * b[k] * std::pow(rho, std::abs(j - k));
    }
  }
  return acc;
}

Eigen::VectorXd rescale_to_variance(const Eigen::VectorXd& beta, double rho,
                                    double target) {
  const double q = ar1_quadratic_form(beta, beta, rho);
  if (!(q > 0.0)) {
    fail(ErrorKind::degenerate, "rescale: zero coefficient vector");
  }
  return beta * std::sqrt(target / q);
}

Eigen::VectorXd genetic_value(TrueModel model, const Eigen::MatrixXd& X,
                              double intercept, const Eigen::VectorXd& beta) {
  const auto n = X.rows();
  Eigen::VectorXd out(n);
  switch (model) {
    case TrueModel::linear:
      out = (X * beta).array() + intercept;
      return out;
    case TrueModel::logistic: {
      Eigen::VectorXd eta = (X * beta).array() + intercept;
      for (Eigen::Index i = 0; i < n; ++i) out[i] = expit(eta[i]);
      return out;
    }
    case TrueModel::probit: {
      Eigen::VectorXd eta = (X * beta).array() + intercept;
      for (Eigen::Index i = 0; i < n; ++i) out[i] = normal_cdf(eta[i]);
      return out;
    }
    case TrueModel::m1:
    case TrueModel::m2: {
      if (X.cols() < 6) fail(ErrorKind::shape, "m1/m2 require p >= 6");
      for (Eigen::Index i = 0; i < n; ++i) {
        double x6[6];
        for (int j = 0; j < 6; ++j) x6[j] = X(i, j);
        out[i] = (model == TrueModel::m1) ? m1_value(x6) : m2_value(x6);
      }
      return out;
    }
  }
  fail(ErrorKind::config, "unknown outcome model");
}

Eigen::VectorXd generate_outcome(TrueModel model, const Eigen::MatrixXd& X,
                                 double intercept, const Eigen::VectorXd& beta,
                                 const Eigen::VectorXd& noise) {
  if (noise.size() != X.rows()) {
    fail(ErrorKind::shape, "generate_outcome: noise length mismatch");
  }
  const auto n = X.rows();
  Eigen::VectorXd out(n);
  switch (model) {
    case TrueModel::linear:
    case TrueModel::m1:
    case TrueModel::m2:
      return genetic_value(model, X, intercept, beta) + noise;
    case TrueModel::logistic: {
      Eigen::VectorXd eta = (X * beta).array() + intercept;
      for (Eigen::Index i = 0; i < n; ++i) {
        out[i] = (noise[i] < expit(eta[i])) ? 1.0 : 0.0;
      }
      return out;
    }
    case TrueModel::probit: {
      Eigen::VectorXd eta = (X * beta).array() + intercept;
      for (Eigen::Index i = 0; i < n; ++i) {
        out[i] = (eta[i] + noise[i] > 0.0) ? 1.0 : 0.0;
      }
      return out;
    }
  }
  fail(ErrorKind::config, "unknown outcome model");
}

Subsample case_control_subsample(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, int n_cases,
                                 int n_controls, Rng& rng) {
  std::vector<int> cases, controls;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    (y[i] == 1.0 ? cases : controls).push_back(static_cast<int>(i));
  }
  if (static_cast<int>(cases.size()) < n_cases ||
      static_cast<int>(controls.size()) < n_controls) {
    fail(ErrorKind::generation,
         "case-control subsample: pool has " + std::to_string(cases.size()) +
             " cases / " + std::to_string(controls.size()) +
             " controls, need " + std::to_string(n_cases) + " / " +
             std::to_string(n_controls));
  }
  rng.shuffle(cases);
  rng.shuffle(controls);
  std::vector<int> keep(cases.begin(), cases.begin() + n_cases);
  keep.insert(keep.end(), controls.begin(), controls.begin() + n_controls);
  std::sort(keep.begin(), keep.end());

  Subsample out;
  out.covariates.resize(n_cases + n_controls, X.cols());
  out.outcome.resize(n_cases + n_controls);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.covariates.row(static_cast<Eigen::Index>(k)) = X.row(keep[k]);
    out.outcome[static_cast<Eigen::Index>(k)] = y[keep[k]];
  }
  return out;
}

namespace {

// Variance of x'beta under the genotype design, estimated on a large seeded
// draw; the genotype covariance has no convenient closed form.
double empirical_design_variance(const SimulationConfig& cfg,
                                 const Eigen::VectorXd& beta, Rng& rng) {
  const int n = 65536;
  const Eigen::MatrixXd X =
      sample_synthetic_genotypes(n, cfg.p, cfg.maf, cfg.rho, rng);
  const Eigen::VectorXd u = X * beta;
  const double mean = u.mean();
  return (u.array() - mean).square().sum() / (n - 1.0);
}

Eigen::VectorXd scaled_coefficients(const SimulationConfig& cfg, int s,
                                    double target, Rng& coef_rng,
                                    Rng& rescale_rng) {
  Eigen::VectorXd beta =
      make_coefficients(cfg.p, s, cfg.coef_scheme, cfg.positions, coef_rng);
  if (s == 0) return beta;
  if (cfg.design == DesignKind::gaussian_ar1) {
    return rescale_to_variance(beta, cfg.rho, target);
  }
  const double var = empirical_design_variance(cfg, beta, rescale_rng);
  if (!(var > 0.0)) fail(ErrorKind::degenerate, "rescale: zero variance");
  return beta * std::sqrt(target / var);
}

}  // namespace

TrueParams make_true_params(const SimulationConfig& cfg) {
  cfg.validate();
  Rng coef_rng(derive_seed(cfg.seed, kCoefStream));
  Rng rescale_rng(derive_seed(cfg.seed, kRescaleStream));
  TrueParams tp;
  tp.beta = scaled_coefficients(cfg, cfg.s_beta, cfg.target_var_f, coef_rng,
                                rescale_rng);
  tp.gamma = scaled_coefficients(cfg, cfg.s_gamma, cfg.target_var_g, coef_rng,
                                 rescale_rng);
  tp.intercept_f = cfg.intercept_f;
  tp.intercept_g = cfg.intercept_g;

  if (cfg.estimator == HarnessEstimator::case_control) {
    if (cfg.design == DesignKind::gaussian_ar1) {
      const double sd =
          std::sqrt(ar1_quadratic_form(tp.beta, tp.beta, cfg.rho));
      tp.prevalence = (sd > 0.0)
                          ? gauss_expectation(
                                [&](double u) {
                                  return expit(tp.intercept_f + u);
                                },
                                sd)
                          : expit(tp.intercept_f);
    } else {
      Rng prev_rng(derive_seed(cfg.seed, kPrevalenceStream));
      const int n = 1 << 17;
      const Eigen::MatrixXd X =
          sample_synthetic_genotypes(n, cfg.p, cfg.maf, cfg.rho, prev_rng);
      const Eigen::VectorXd v =
          genetic_value(TrueModel::logistic, X, tp.intercept_f, tp.beta);
      tp.prevalence = v.mean();
    }
  }
  return tp;
}

// ---------------------------------------------------------------------------
// Truth oracles
// ---------------------------------------------------------------------------

namespace {

constexpr int kReducedDim = 8;  // x1..x6 plus the two linear scores

double sigma_dot(const Eigen::VectorXd& beta, int i, double rho) {
  double acc = 0.0;
  for (int k = 0; k < beta.size(); ++k) {
    if (beta[k] != 0.0) acc += beta[k] * std::pow(rho, std::abs(i - k));
  }
  return acc;
}

// Joint covariance of (x_1..x_6, x'beta, x'gamma) under the AR(1) design.
Eigen::MatrixXd reduced_covariance(const Eigen::VectorXd& beta,
                                   const Eigen::VectorXd& gamma, double rho) {
  Eigen::MatrixXd C(kReducedDim, kReducedDim);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) C(i, j) = std::pow(rho, std::abs(i - j));
    C(i, 6) = C(6, i) = sigma_dot(beta, i, rho);
    C(i, 7) = C(7, i) = sigma_dot(gamma, i, rho);
  }
  C(6, 6) = ar1_quadratic_form(beta, beta, rho);
  C(7, 7) = ar1_quadratic_form(gamma, gamma, rho);
  C(6, 7) = C(7, 6) = ar1_quadratic_form(beta, gamma, rho);
  return C;
}

// Factor for sampling; eigen-based so rank-deficient covariances (a score
// that is an exact combination of x_1..x_6) are handled.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& C) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal();
}

double reduced_value(TrueModel model, double intercept, const double* x6,
                     double score) {
  switch (model) {
    case TrueModel::linear: return intercept + score;
    case TrueModel::logistic: return expit(intercept + score);
    case TrueModel::probit: return normal_cdf(intercept + score);
    case TrueModel::m1: return m1_value(x6);
    case TrueModel::m2: return m2_value(x6);
  }
  fail(ErrorKind::config, "unknown outcome model");
}

struct ChunkSums {
  double sf = 0.0, sg = 0.0, sfg = 0.0;
};

struct OracleAcc {
  std::vector<ChunkSums> chunks;
  long chunk_draws = 0;

  double estimate() const {
    double tf = 0.0, tg = 0.0, tfg = 0.0;
    for (const auto& c : chunks) {
      tf += c.sf;
      tg += c.sg;
      tfg += c.sfg;
    }
    const double m = static_cast<double>(chunk_draws) * chunks.size();
    return tfg / m - (tf / m) * (tg / m);
  }

  double standard_error() const {
    const auto n_chunks = chunks.size();
    if (n_chunks < 2) return std::numeric_limits<double>::infinity();
    double tf = 0.0, tg = 0.0;
    for (const auto& c : chunks) {
      tf += c.sf;
      tg += c.sg;
    }
    const double m = static_cast<double>(chunk_draws) * n_chunks;
    const double mu_f = tf / m, mu_g = tg / m;
    std::vector<double> per(n_chunks);
    for (std::size_t k = 0; k < n_chunks; ++k) {
      const auto& c = chunks[k];
      per[k] = c.sfg / chunk_draws - mu_f * c.sg / chunk_draws -
               mu_g * c.sf / chunk_draws + mu_f * mu_g;
    }
    const double mean = std::accumulate(per.begin(), per.end(), 0.0) / n_chunks;
    double var = 0.0;
    for (double v : per) var += (v - mean) * (v - mean);
    var /= (n_chunks - 1.0);
    return std::sqrt(var / n_chunks);
  }
};

// Monte Carlo Cov(f*, g*) through the reduced joint distribution
// (x_1..x_6, x'beta, x'gamma) for the gaussian design.
TruthValue covariance_oracle_gaussian(const SimulationConfig& cfg,
                                      const TrueParams& tp,
                                      double max_oracle_se) {
  const Eigen::MatrixXd L =
      covariance_factor(reduced_covariance(tp.beta, tp.gamma, cfg.rho));
  Rng rng(derive_seed(cfg.seed, kOracleStream));

  OracleAcc acc;
  acc.chunk_draws = 1 << 14;
  const int min_chunks = 64;
  const int max_chunks = 1 << 14;
  Eigen::VectorXd zvec(kReducedDim), xvec(kReducedDim);
  while (true) {
    ChunkSums cs;
    for (long d = 0; d < acc.chunk_draws; ++d) {
      for (int j = 0; j < kReducedDim; ++j) zvec[j] = rng.normal();
      xvec.noalias() = L * zvec;
      const double fv =
          reduced_value(cfg.model_f, tp.intercept_f, xvec.data(), xvec[6]);
      const double gv =
          reduced_value(cfg.model_g, tp.intercept_g, xvec.data(), xvec[7]);
      cs.sf += fv;
      cs.sg += gv;
      cs.sfg += fv * gv;
    }
    acc.chunks.push_back(cs);

    if (static_cast<int>(acc.chunks.size()) < min_chunks) continue;
    const double se = acc.standard_error();
    if (max_oracle_se <= 0.0 || se <= max_oracle_se) break;
    if (static_cast<int>(acc.chunks.size()) >= max_chunks) {
      fail(ErrorKind::generation,
           "truth oracle: standard error " + std::to_string(se) +
               " above the requested precision after " +
               std::to_string(acc.chunks.size() * acc.chunk_draws) +
               " draws");
    }
  }

  TruthValue tv;
  tv.value = acc.estimate();
  tv.provenance = "monte-carlo";
  tv.oracle_se = acc.standard_error();
  return tv;
}

// Full-row Monte Carlo for the genotype design.
TruthValue covariance_oracle_genotype(const SimulationConfig& cfg,
                                      const TrueParams& tp,
                                      double max_oracle_se) {
  Rng rng(derive_seed(cfg.seed, kOracleStream));
  OracleAcc acc;
  acc.chunk_draws = 1 << 12;
  const int min_chunks = 32;
  const int max_chunks = 1 << 9;
  while (true) {
    const Eigen::MatrixXd X = sample_synthetic_genotypes(
        static_cast<int>(acc.chunk_draws), cfg.p, cfg.maf, cfg.rho, rng);
    const Eigen::VectorXd fv =
        genetic_value(cfg.model_f, X, tp.intercept_f, tp.beta);
    const Eigen::VectorXd gv =
        genetic_value(cfg.model_g, X, tp.intercept_g, tp.gamma);
    ChunkSums cs;
    cs.sf = fv.sum();
    cs.sg = gv.sum();
    cs.sfg = fv.dot(gv);
    acc.chunks.push_back(cs);

    if (static_cast<int>(acc.chunks.size()) < min_chunks) continue;
    const double se = acc.standard_error();
    if (max_oracle_se <= 0.0 || se <= max_oracle_se) break;
    if (static_cast<int>(acc.chunks.size()) >= max_chunks) {
      fail(ErrorKind::generation,
           "truth oracle: standard error " + std::to_string(se) +
               " above the requested precision");
    }
  }
  TruthValue tv;
  tv.value = acc.estimate();
  tv.provenance = "monte-carlo";
  tv.oracle_se = acc.standard_error();
  return tv;
}

// Population linear projection of a conditional-mean function under the
// AR(1) design: beta_proj = Sigma^-1 E[m(x) x]. For GLM-type models the
// score dependence gives beta_proj = E[f'(b0+u)] beta exactly; for m1/m2 the
// leading moments are estimated by Monte Carlo and mapped through the
// tridiagonal AR(1) precision.
struct Projection {
  Eigen::VectorXd coef;                      // full p-dim vector
  std::vector<Eigen::VectorXd> chunk_coefs;  // empty when exact
};

Projection glm_projection(const SimulationConfig& cfg, TrueModel model,
                          double intercept, const Eigen::VectorXd& beta) {
  Projection proj;
  if (model == TrueModel::linear) {
    proj.coef = beta;
    return proj;
  }
  const double var = ar1_quadratic_form(beta, beta, cfg.rho);
  const double sd = std::sqrt(std::max(var, 0.0));
  double c = 0.0;
  if (sd == 0.0) {
    c = 0.0;
  } else if (model == TrueModel::logistic) {
    c = gauss_expectation(
        [&](double u) {
          const double p = expit(intercept + u);
          return p * (1.0 - p);
        },
        sd);
  } else {  // probit
    c = gauss_expectation(
        [&](double u) { return normal_pdf(intercept + u); }, sd);
  }
  proj.coef = c * beta;
  return proj;
}

// m1/m2: delta_j = E[m(x) x_j] for j in a window; both functions involve
// x_1..x_6 only, so the projection is supported there and the window closes
// the tridiagonal recursion.
constexpr int kProjWindow = 8;

Eigen::VectorXd window_to_projection(const Eigen::VectorXd& delta, double rho,
                                     int p) {
  Eigen::VectorXd proj = Eigen::VectorXd::Zero(p);
  const double denom = 1.0 - rho * rho;
  proj[0] = (delta[0] - rho * delta[1]) / denom;
  for (int j = 1; j + 1 < kProjWindow; ++j) {
    proj[j] = (-rho * delta[j - 1] + (1.0 + rho * rho) * delta[j] -
               rho * delta[j + 1]) /
              denom;
  }
  return proj;
}

struct MomentChunks {
  std::vector<Eigen::VectorXd> delta_f, delta_g;  // per-chunk moment means
};

MomentChunks nonlinear_moments(const SimulationConfig& cfg, Rng& rng,
                               int n_chunks, long chunk_draws) {
  MomentChunks mc;
  const bool need_f = (cfg.model_f == TrueModel::m1 || cfg.model_f == TrueModel::m2);
  const bool need_g = (cfg.model_g == TrueModel::m1 || cfg.model_g == TrueModel::m2);
  const double scale = std::sqrt(1.0 - cfg.rho * cfg.rho);
  for (int c = 0; c < n_chunks; ++c) {
    Eigen::VectorXd df = Eigen::VectorXd::Zero(kProjWindow);
    Eigen::VectorXd dg = Eigen::VectorXd::Zero(kProjWindow);
    double x[kProjWindow];
    for (long d = 0; d < chunk_draws; ++d) {
      x[0] = rng.normal();
      for (int j = 1; j < kProjWindow; ++j) {
        x[j] = cfg.rho * x[j - 1] + scale * rng.normal();
      }
      if (need_f) {
        const double v =
            (cfg.model_f == TrueModel::m1) ? m1_value(x) : m2_value(x);
        for (int j = 0; j < kProjWindow; ++j) df[j] += v * x[j];
      }
      if (need_g) {
        const double v =
            (cfg.model_g == TrueModel::m1) ? m1_value(x) : m2_value(x);
        for (int j = 0; j < kProjWindow; ++j) dg[j] += v * x[j];
      }
    }
    mc.delta_f.push_back(df / static_cast<double>(chunk_draws));
    mc.delta_g.push_back(dg / static_cast<double>(chunk_draws));
  }
  return mc;
}

TruthValue narrow_sense_oracle(const SimulationConfig& cfg,
                               const TrueParams& tp, double max_oracle_se) {
  const bool mc_f =
      (cfg.model_f == TrueModel::m1 || cfg.model_f == TrueModel::m2);
  const bool mc_g =
      (cfg.model_g == TrueModel::m1 || cfg.model_g == TrueModel::m2);

  Projection pf, pg;
  if (!mc_f) pf = glm_projection(cfg, cfg.model_f, tp.intercept_f, tp.beta);
  if (!mc_g) pg = glm_projection(cfg, cfg.model_g, tp.intercept_g, tp.gamma);

  if (!mc_f && !mc_g) {
    TruthValue tv;
    tv.value = ar1_quadratic_form(pf.coef, pg.coef, cfg.rho);
    tv.provenance =
        (cfg.model_f == TrueModel::linear && cfg.model_g == TrueModel::linear)
            ? "analytic"
            : "monte-carlo";
    tv.oracle_se = 0.0;
    return tv;
  }

  Rng rng(derive_seed(cfg.seed, kOracleStream));
  const long chunk_draws = 1 << 16;
  int n_chunks = 128;
  const int max_total_chunks = 1024;
  MomentChunks mc = nonlinear_moments(cfg, rng, n_chunks, chunk_draws);

  auto evaluate = [&]() -> std::pair<double, double> {
    const int C = static_cast<int>(mc.delta_f.size());
    Eigen::VectorXd df = Eigen::VectorXd::Zero(kProjWindow);
    Eigen::VectorXd dg = Eigen::VectorXd::Zero(kProjWindow);
    for (int c = 0; c < C; ++c) {
      df += mc.delta_f[c];
      dg += mc.delta_g[c];
    }
    df /= C;
    dg /= C;
    const Eigen::VectorXd proj_f =
        mc_f ? window_to_projection(df, cfg.rho, cfg.p) : pf.coef;
    const Eigen::VectorXd proj_g =
        mc_g ? window_to_projection(dg, cfg.rho, cfg.p) : pg.coef;
    const double value = ar1_quadratic_form(proj_f, proj_g, cfg.rho);

    std::vector<double> per(C);
    for (int c = 0; c < C; ++c) {
      const Eigen::VectorXd f_c =
          mc_f ? window_to_projection(mc.delta_f[c], cfg.rho, cfg.p) : pf.coef;
      const Eigen::VectorXd g_c =
          mc_g ? window_to_projection(mc.delta_g[c], cfg.rho, cfg.p) : pg.coef;
      per[c] = ar1_quadratic_form(f_c, g_c, cfg.rho);
    }
    const double mean = std::accumulate(per.begin(), per.end(), 0.0) / C;
    double var = 0.0;
    for (double v : per) var += (v - mean) * (v - mean);
    var /= (C - 1.0);
    return {value, std::sqrt(var / C)};
  };

  auto [value, se] = evaluate();
  while (max_oracle_se > 0.0 && se > max_oracle_se) {
    if (static_cast<int>(mc.delta_f.size()) >= max_total_chunks) {
      fail(ErrorKind::generation,
           "projection oracle: standard error " + std::to_string(se) +
               " above the requested precision");
    }
    MomentChunks more = nonlinear_moments(cfg, rng, n_chunks, chunk_draws);
    mc.delta_f.insert(mc.delta_f.end(), more.delta_f.begin(),
                      more.delta_f.end());
    mc.delta_g.insert(mc.delta_g.end(), more.delta_g.begin(),
                      more.delta_g.end());
    std::tie(value, se) = evaluate();
  }

  TruthValue tv;
  tv.value = value;
  tv.provenance = "monte-carlo";
  tv.oracle_se = se;
  return tv;
}

}  // namespace

TruthValue truth_value(const SimulationConfig& cfg, const TrueParams& tp,
                       double max_oracle_se) {
  cfg.validate();
  if (cfg.truth_kind == TruthKind::narrow_sense) {
    return narrow_sense_oracle(cfg, tp, max_oracle_se);
  }
  if (cfg.model_f == TrueModel::linear && cfg.model_g == TrueModel::linear &&
      cfg.design == DesignKind::gaussian_ar1) {
    TruthValue tv;
    tv.value = ar1_quadratic_form(tp.beta, tp.gamma, cfg.rho);
    tv.provenance = "analytic";
    tv.oracle_se = 0.0;
    return tv;
  }
  if (cfg.design == DesignKind::gaussian_ar1) {
    return covariance_oracle_gaussian(cfg, tp, max_oracle_se);
  }
  return covariance_oracle_genotype(cfg, tp, max_oracle_se);
}

TruthValue truth_value(const SimulationConfig& cfg, double max_oracle_se) {
  return truth_value(cfg, make_true_params(cfg), max_oracle_se);
}

// ---------------------------------------------------------------------------
// Replicates
// ---------------------------------------------------------------------------

namespace {

IndexSets make_index_sets(const SimulationConfig& cfg) {
  IndexSets idx;
  idx.n_y = cfg.n_y;
  idx.n_z = cfg.n_z;
  switch (cfg.overlap) {
    case OverlapMode::full: idx.n_o = cfg.n_y; break;
    case OverlapMode::disjoint: idx.n_o = 0; break;
    case OverlapMode::partial: idx.n_o = cfg.n_overlap; break;
  }
  idx.n_union = idx.n_y + idx.n_z - idx.n_o;
  idx.idx_y.resize(idx.n_y);
  std::iota(idx.idx_y.begin(), idx.idx_y.end(), 0);
  idx.idx_z.reserve(idx.n_z);
  for (int k = 0; k < idx.n_o; ++k) idx.idx_z.push_back(k);
  for (int k = 0; k < idx.n_z - idx.n_o; ++k) {
    idx.idx_z.push_back(idx.n_y + k);
  }
  idx.idx_overlap.resize(idx.n_o);
  std::iota(idx.idx_overlap.begin(), idx.idx_overlap.end(), 0);
  return idx;
}

Eigen::MatrixXd sample_design(const SimulationConfig& cfg, int n, Rng& rng) {
  if (cfg.design == DesignKind::gaussian_ar1) {
    return sample_ar1_design(n, cfg.p, cfg.rho, rng);
  }
  return sample_synthetic_genotypes(n, cfg.p, cfg.maf, cfg.rho, rng);
}

// Centering by sample column means; the raw matrix is used for outcome
// generation, the centered copy for analysis.
Eigen::MatrixXd center_columns(const Eigen::MatrixXd& X) {
  return X.rowwise() - X.colwise().mean();
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& at) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(at.size()));
  for (std::size_t k = 0; k < at.size(); ++k) out[k] = v[at[k]];
  return out;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& X,
                            const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(k) = X.row(rows[k]);
  return out;
}

Eigen::VectorXd model_noise(TrueModel model, const Eigen::VectorXd& errors,
                            const std::vector<int>& rows, Rng& rng) {
  if (model == TrueModel::logistic) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(rows.size()));
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.uniform();
    return u;
  }
  return gather(errors, rows);
}

AlignedData simulate_joint(const SimulationConfig& cfg, const TrueParams& tp,
                           Rng& rng) {
  const IndexSets idx = make_index_sets(cfg);
  const Eigen::MatrixXd X_raw = sample_design(cfg, idx.n_union, rng);
  auto [eps, v] = sample_correlated_errors(idx.n_union, cfg.error_corr, rng);

  const Eigen::MatrixXd X_y = gather_rows(X_raw, idx.idx_y);
  const Eigen::VectorXd noise_y = model_noise(cfg.model_f, eps, idx.idx_y, rng);
  const Eigen::VectorXd y =
      generate_outcome(cfg.model_f, X_y, tp.intercept_f, tp.beta, noise_y);

  const Eigen::MatrixXd X_z = gather_rows(X_raw, idx.idx_z);
  const Eigen::VectorXd noise_z = model_noise(cfg.model_g, v, idx.idx_z, rng);
  const Eigen::VectorXd z =
      generate_outcome(cfg.model_g, X_z, tp.intercept_g, tp.gamma, noise_z);

  AlignedData data;
  data.covariates = (cfg.design == DesignKind::synthetic_genotype)
                        ? center_columns(X_raw)
                        : X_raw;
  data.index = idx;
  data.y = y;
  data.z = z;
  data.ids.resize(idx.n_union);
  return data;
}

// Case-control generation: a pool of logistic outcomes is drawn (regenerated
// with a larger pool if a class is short), then exactly n_y/2 cases and
// controls are kept; the cohort study is disjoint.
AlignedData simulate_case_control(const SimulationConfig& cfg,
                                  const TrueParams& tp, Rng& rng) {
  const int want = cfg.n_y / 2;
  Subsample sub;
  int pool_n = 3 * cfg.n_y;
  bool done = false;
  for (int attempt = 0; attempt < 8 && !done; ++attempt, pool_n *= 2) {
    const Eigen::MatrixXd pool_X = sample_design(cfg, pool_n, rng);
    Eigen::VectorXd u(pool_n);
    for (int i = 0; i < pool_n; ++i) u[i] = rng.uniform();
    const Eigen::VectorXd pool_y = generate_outcome(
        TrueModel::logistic, pool_X, tp.intercept_f, tp.beta, u);
    int cases = static_cast<int>(pool_y.sum());
    if (cases >= want && pool_n - cases >= want) {
      sub = case_control_subsample(pool_X, pool_y, want, want, rng);
      done = true;
    }
  }
  if (!done) {
    fail(ErrorKind::generation,
         "case-control generation: could not draw enough cases/controls");
  }

  const Eigen::MatrixXd X_z = sample_design(cfg, cfg.n_z, rng);
  auto [eps_z, v_z] = sample_correlated_errors(cfg.n_z, cfg.error_corr, rng);
  std::vector<int> all_z(cfg.n_z);
  std::iota(all_z.begin(), all_z.end(), 0);
  const Eigen::VectorXd noise_z = model_noise(cfg.model_g, v_z, all_z, rng);
  const Eigen::VectorXd z =
      generate_outcome(cfg.model_g, X_z, tp.intercept_g, tp.gamma, noise_z);

  AlignedData data;
  data.index.n_y = cfg.n_y;
  data.index.n_z = cfg.n_z;
  data.index.n_o = 0;
  data.index.n_union = cfg.n_y + cfg.n_z;
  data.index.idx_y.resize(cfg.n_y);
  std::iota(data.index.idx_y.begin(), data.index.idx_y.end(), 0);
  data.index.idx_z.resize(cfg.n_z);
  std::iota(data.index.idx_z.begin(), data.index.idx_z.end(), cfg.n_y);

  Eigen::MatrixXd X(data.index.n_union, cfg.p);
  X.topRows(cfg.n_y) = sub.covariates;
  X.bottomRows(cfg.n_z) = X_z;
  data.covariates = (cfg.design == DesignKind::synthetic_genotype)
                        ? center_columns(X)
                        : std::move(X);
  data.y = sub.outcome;
  data.z = z;
  data.ids.resize(data.index.n_union);
  return data;
}

}  // namespace

ReplicateRecord run_replicate(const SimulationConfig& cfg,
                              const TrueParams& tp, std::uint64_t rep_seed) {
  Rng rng(rep_seed);
  ReplicateRecord rec;
  rec.seed = rep_seed;

  if (cfg.estimator == HarnessEstimator::case_control) {
    const AlignedData data = simulate_case_control(cfg, tp, rng);
    const WeightedReport rep =
        run_case_control(data, GlmFamily{cfg.fit_g}, cfg.fit, tp.prevalence,
                         std::nullopt, cfg.alpha, rep_seed);
    rec.estimate = rep.base.estimate;
    rec.se = rep.base.se;
    rec.ci_lower = rep.base.ci_lower;
    rec.ci_upper = rep.base.ci_upper;
    return rec;
  }

  const AlignedData data = simulate_joint(cfg, tp, rng);
  CovarianceReport rep;
  if (cfg.estimator == HarnessEstimator::cross_fit) {
    rep = run_cross_fitted(data, GlmFamily{cfg.fit_f}, GlmFamily{cfg.fit_g},
                           cfg.fit, cfg.alpha, rep_seed);
  } else {
    const EstimatorMode mode = (cfg.truth_kind == TruthKind::narrow_sense)
                                   ? EstimatorMode::narrow_sense
                                   : EstimatorMode::general;
    rep = run_pipeline_aligned(data, GlmFamily{cfg.fit_f},
                               GlmFamily{cfg.fit_g}, cfg.fit, cfg.alpha,
                               rep_seed, mode);
  }
  rec.estimate = rep.estimate;
  rec.se = rep.se;
  rec.ci_lower = rep.ci_lower;
  rec.ci_upper = rep.ci_upper;
  return rec;
}

CoverageReport run_coverage_study(const SimulationConfig& cfg, int threads) {
  cfg.validate();
  const TrueParams tp = make_true_params(cfg);
  if (threads <= 0) threads = hardware_threads();

  CoverageReport report;
  report.replicates.resize(cfg.replications);
  parallel_for(cfg.replications, threads, [&](int r) {
    const std::uint64_t rep_seed = derive_seed(cfg.seed, r + 1);
    try {
      report.replicates[r] = run_replicate(cfg, tp, rep_seed);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " [replicate " +
                                std::to_string(r) + ", seed " +
                                std::to_string(rep_seed) + "]");
    }
  });

  double sum_se = 0.0, sum_est = 0.0;
  for (const auto& rec : report.replicates) {
    sum_se += rec.se;
    sum_est += rec.estimate;
  }
  report.mean_se = sum_se / cfg.replications;
  report.mean_estimate = sum_est / cfg.replications;

  report.truth = truth_value(cfg, tp, report.mean_se / 20.0);
  int covered = 0;
  for (auto& rec : report.replicates) {
    rec.covered =
        (rec.ci_lower <= report.truth.value && report.truth.value <= rec.ci_upper);
    covered += rec.covered ? 1 : 0;
  }
  report.empirical_coverage =
      static_cast<double>(covered) / cfg.replications;
  return report;
}

}  // namespace gencov
