#ifndef GENCOV_SIMULATION_HPP
#define GENCOV_SIMULATION_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gencov/estimator.hpp"
#include "gencov/glm.hpp"
#include "gencov/rng.hpp"

namespace gencov {

enum class OverlapMode { full, disjoint, partial };
enum class DesignKind { gaussian_ar1, synthetic_genotype };
enum class CoefScheme { ones, gaussian };
enum class CoefPositions { first_s, random_s };
enum class TrueModel { linear, logistic, probit, m1, m2 };
enum class HarnessEstimator { standard, cross_fit, case_control };
enum class TruthKind { genetic_covariance, narrow_sense };

// One Monte Carlo cell: sample sizes, design, true outcome models, working
// models, and the replication budget.
struct SimulationConfig {
  int n_y = 800;
  int n_z = 800;
  OverlapMode overlap = OverlapMode::full;
  int n_overlap = 0;  // used only for OverlapMode::partial
  int p = 500;
  DesignKind design = DesignKind::gaussian_ar1;
  double rho = 0.6;
  double maf = 0.25;  // synthetic genotype design
  int s_beta = 5;
  int s_gamma = 5;
  CoefScheme coef_scheme = CoefScheme::ones;
  CoefPositions positions = CoefPositions::first_s;
  double target_var_f = 4.0;
  double target_var_g = 4.0;
  double error_corr = 0.4;
  TrueModel model_f = TrueModel::linear;
  TrueModel model_g = TrueModel::linear;
  Family fit_f = Family::linear;
  Family fit_g = Family::linear;
  HarnessEstimator estimator = HarnessEstimator::standard;
  TruthKind truth_kind = TruthKind::genetic_covariance;
  double intercept_f = 0.0;  // for case-control designs typically -1
  double intercept_g = 0.0;
  double alpha = 0.05;
  int replications = 300;
  std::uint64_t seed = 1;
  FitConfig fit;

  void validate() const;
};

struct ReplicateRecord {
  std::uint64_t seed = 0;
  double estimate = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool covered = false;
};

struct TruthValue {
  double value = 0.0;
  std::string provenance;  // "analytic" or "monte-carlo"
  double oracle_se = 0.0;
};

struct CoverageReport {
  double empirical_coverage = 0.0;
  double mean_se = 0.0;
  double mean_estimate = 0.0;
  TruthValue truth;
  std::vector<ReplicateRecord> replicates;
};

// The coefficient vectors, intercepts and (for case-control cells) the
// population prevalence of one simulation cell. Drawn once per study from
// the config seed; shared by every replicate.
struct TrueParams {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  double intercept_f = 0.0;
  double intercept_g = 0.0;
  double prevalence = 0.0;  // case-control designs only
};

// Rows i.i.d. N(0, Sigma) with Sigma_jk = rho^|j-k| via the AR(1) recursion.
Eigen::MatrixXd sample_ar1_design(int n, int p, double rho, Rng& rng);

// Additive genotype counts in {0,1,2}: two latent AR(1) haplotypes
// thresholded at the (1-maf) normal quantile, then summed.
Eigen::MatrixXd sample_synthetic_genotypes(int n, int p, double maf,
                                           double rho, Rng& rng);

// i.i.d. bivariate normal pairs with unit variances and correlation corr.
std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_correlated_errors(
    int n, double corr, Rng& rng);

Eigen::VectorXd make_coefficients(int p, int s, CoefScheme scheme,
                                  CoefPositions positions, Rng& rng);

// a' Sigma b for the AR(1) covariance Sigma_jk = rho^|j-k|.
double ar1_quadratic_form(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                          double rho);

// Returns beta * sqrt(target / beta' Sigma beta).
Eigen::VectorXd rescale_to_variance(const Eigen::VectorXd& beta, double rho,
                                    double target);

// Conditional mean f*(x) per row of X.
Eigen::VectorXd genetic_value(TrueModel model, const Eigen::MatrixXd& X,
                              double intercept, const Eigen::VectorXd& beta);

// noise carries the model-specific randomness: additive errors for
// linear/m1/m2, the latent error for probit, uniform draws for logistic.
Eigen::VectorXd generate_outcome(TrueModel model, const Eigen::MatrixXd& X,
                                 double intercept, const Eigen::VectorXd& beta,
                                 const Eigen::VectorXd& noise);

struct Subsample {
  Eigen::MatrixXd covariates;
  Eigen::VectorXd outcome;
};

// Uniform subset with exactly n_cases cases and n_controls controls.
Subsample case_control_subsample(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, int n_cases,
                                 int n_controls, Rng& rng);

TrueParams make_true_params(const SimulationConfig& config);

// The population target of one cell: the analytic bilinear form when both
// true models are linear, the linear-projection target in narrow-sense mode,
// and a large-sample Monte Carlo evaluation of Cov(f*, g*) otherwise. When
// max_oracle_se > 0, draws are added until the oracle standard error falls
// below it.
TruthValue truth_value(const SimulationConfig& config,
                       double max_oracle_se = 0.0);
TruthValue truth_value(const SimulationConfig& config, const TrueParams& tp,
                       double max_oracle_se);

ReplicateRecord run_replicate(const SimulationConfig& config,
                              const TrueParams& tp, std::uint64_t rep_seed);

CoverageReport run_coverage_study(const SimulationConfig& config,
                                  int threads = 0);

}  // namespace gencov

#endif
