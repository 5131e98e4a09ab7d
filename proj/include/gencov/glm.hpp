#ifndef GENCOV_GLM_HPP
#define GENCOV_GLM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "gencov/error.hpp"
#include "gencov/mathstats.hpp"

namespace gencov {

enum class Family { linear, logistic };

// Canonical-link working model: F' = f. linear: f(t) = t; logistic:
// f(t) = exp(t)/(1+exp(t)).
struct GlmFamily {
  Family kind = Family::linear;

  double mean(double t) const {
    return kind == Family::linear ? t : expit(t);
  }
};

enum class SelectionRule { min_cv_error, one_se };

struct FitConfig {
  int n_lambda = 100;
  // <= 0 selects the usual default: 0.01 when n < p, 1e-4 otherwise.
  double lambda_min_ratio = 0.0;
  // Convergence: max absolute coefficient change per sweep, standardized
  // scale.
  double cd_tolerance = 1e-7;
  int max_sweeps = 10000;
  int cv_folds = 10;
  SelectionRule selection_rule = SelectionRule::min_cv_error;
  bool penalize_intercept = false;
  std::uint64_t seed = 0;

  double min_ratio(Eigen::Index n, Eigen::Index p) const {
    if (lambda_min_ratio > 0.0) return lambda_min_ratio;
    return n < p ? 1e-2 : 1e-4;
  }
};

// A fitted lasso GLM on the original covariate scale. Columns are centered
// and scaled to unit standard deviation internally; the penalty applies on
// that standardized scale and coefficients are transformed back.
struct FittedGlm {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  std::vector<int> support;
  GlmFamily family;
  double lambda = 0.0;
  Eigen::VectorXd column_means;
  Eigen::VectorXd column_scales;

  int support_size() const { return static_cast<int>(support.size()); }
};

struct CvFit {
  FittedGlm model;
  Eigen::VectorXd lambdas;    // decreasing grid
  Eigen::VectorXd mean_loss;  // per-lambda mean validation loss
  Eigen::VectorXd se_loss;    // per-lambda standard error across folds
  int selected = 0;           // index into lambdas
};

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Geometric grid of n_lambda values from lambda_max down to
// lambda_max * min_ratio.
Eigen::VectorXd lambda_grid(double lambda_max, int n_lambda, double min_ratio);

// Smallest penalty with an all-zero coefficient vector (standardized scale).
double lambda_max_value(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

FittedGlm fit_at_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        GlmFamily family, double lambda,
                        const FittedGlm* warm_start, const FitConfig& config);

// K-fold cross-validated fit over the full penalty path; validation loss is
// mean squared error (linear) or mean negative log-likelihood (logistic).
CvFit fit_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
             GlmFamily family, const FitConfig& config);

Eigen::VectorXd predict_mean(const FittedGlm& model, const Eigen::MatrixXd& X);

Eigen::VectorXd residuals(const FittedGlm& model, const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y);

}  // namespace gencov

#endif
