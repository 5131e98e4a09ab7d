#ifndef GENCOV_ESTIMATOR_HPP
#define GENCOV_ESTIMATOR_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "gencov/dataset.hpp"
#include "gencov/glm.hpp"

namespace gencov {

enum class EstimatorMode { general, narrow_sense, case_control, cross_fitted };

std::string mode_name(EstimatorMode mode);

// Everything needed to evaluate the covariance estimator: the union design,
// the two fitted working models and the observed outcomes of each study.
struct EstimatorInputs {
  const Eigen::MatrixXd& covariates;  // N x p union matrix
  const IndexSets& index;
  const FittedGlm& model_f;
  const FittedGlm& model_g;
  const Eigen::VectorXd& y;  // over idx_y order
  const Eigen::VectorXd& z;  // over idx_z order
};

struct CovarianceReport {
  double estimate = 0.0;
  double mu_f = 0.0;
  double mu_g = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double alpha = 0.05;
  int n_y = 0;
  int n_z = 0;
  int n_overlap = 0;
  int n_union = 0;
  EstimatorMode mode = EstimatorMode::general;
  double lambda_f = 0.0;
  double lambda_g = 0.0;
  int support_f = 0;
  int support_g = 0;
  std::uint64_t seed = 0;
  bool degenerate_se = false;  // dispersion of the delta terms was zero
  // cross-fitted mode diagnostics
  double half_estimate_1 = 0.0;
  double half_estimate_2 = 0.0;
  double half_sigma2_1 = 0.0;
  double half_sigma2_2 = 0.0;
};

struct EstimateResult {
  double I_hat = 0.0;
  double mu_f = 0.0;
  double mu_g = 0.0;
  Eigen::VectorXd delta;  // union ordering, sums to I_hat
};

struct VarianceCi {
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool degenerate = false;
};

// mu_f = N^-1 sum_union f_i + n_y^-1 sum_{I_y} eps_i (and symmetrically for
// mu_g with the z-study residuals).
std::pair<double, double> estimate_means(const EstimatorInputs& inputs);

// Per-sample decomposition terms; centered fitted values use the supplied
// means.
Eigen::VectorXd delta_terms(const EstimatorInputs& inputs, double mu_f,
                            double mu_g);

// The debiased covariance estimate together with its decomposition.
EstimateResult estimate_I(const EstimatorInputs& inputs);

// sigma^2 = sum_i (delta_i - I_hat/N)^2; CI = I_hat -+ z_{1-alpha/2} sigma.
VarianceCi variance_and_ci(double I_hat, const Eigen::VectorXd& delta,
                           int n_union, double alpha);

// Full pipeline on already aligned data: cross-validated fits of both
// working models on their own study samples, then estimate, variance, CI.
// No sample splitting.
CovarianceReport run_pipeline_aligned(const AlignedData& data,
                                      GlmFamily family_f, GlmFamily family_g,
                                      const FitConfig& fit_config, double alpha,
                                      std::uint64_t seed,
                                      EstimatorMode mode = EstimatorMode::general);

CovarianceReport run_pipeline(const Dataset& ds_y, const Dataset& ds_z,
                              GlmFamily family_f, GlmFamily family_g,
                              const FitConfig& fit_config, double alpha,
                              std::uint64_t seed,
                              EstimatorMode mode = EstimatorMode::general);

// Cross-fitting: each study is halved (a shared individual lands in the same
// half of both studies), models are fitted on one half and evaluated on the
// other, then the roles are reversed. Returns the averaged estimate with
// pooled variance sigma_s = sqrt(sigma_1^2 + sigma_2^2)/2.
CovarianceReport run_cross_fitted(const AlignedData& data, GlmFamily family_f,
                                  GlmFamily family_g,
                                  const FitConfig& fit_config, double alpha,
                                  std::uint64_t split_seed);

// Restriction of aligned data to a subset of union members (order
// preserved); used by the cross-fitting split.
AlignedData subset_aligned(const AlignedData& data,
                           const std::vector<char>& member);

}  // namespace gencov

#endif
