#ifndef GENCOV_CASE_CONTROL_HPP
#define GENCOV_CASE_CONTROL_HPP

#include <Eigen/Dense>
#include <optional>

#include "gencov/estimator.hpp"

namespace gencov {

// Sampling description of a case-control study: population prevalence p1
// (externally supplied) and case fraction pi1 in the collected sample.
struct CaseControlSpec {
  double prevalence_p1 = 0.0;
  double pi1 = 0.0;

  double p0() const { return 1.0 - prevalence_p1; }
  double pi0() const { return 1.0 - pi1; }
  double control_weight() const { return p0() / pi0(); }
  double case_weight() const { return prevalence_p1 / pi1; }

  void validate() const {
    if (!(prevalence_p1 > 0.0 && prevalence_p1 < 1.0)) {
      fail(ErrorKind::config, "case-control: prevalence must lie in (0,1)");
    }
    if (!(pi1 > 0.0 && pi1 < 1.0)) {
      fail(ErrorKind::config, "case-control: case fraction must lie in (0,1)");
    }
  }
};

struct WeightedReport {
  CovarianceReport base;  // mode = case_control
  double beta0_star = 0.0;
  double sigma2_y0 = 0.0;  // controls component (weight p0/pi0)
  double sigma2_y1 = 0.0;  // cases component (weight p1/pi1)
  double sigma2_z = 0.0;
  double control_weight = 0.0;
  double case_weight = 0.0;
  double prevalence = 0.0;
  double case_fraction = 0.0;
};

// beta0* = beta0 + log(p1 pi0 / (p0 pi1)); slope coefficients unchanged.
double correct_intercept(double beta0_hat, const CaseControlSpec& spec);

FittedGlm correct_intercept(const FittedGlm& model, const CaseControlSpec& spec);

// w_i = 1 on the cohort study; p0/pi0 for controls and p1/pi1 for cases of
// the case-control study. Requires disjoint studies.
Eigen::VectorXd compute_weights(const IndexSets& index,
                                const Eigen::VectorXd& y,
                                const CaseControlSpec& spec);

// Weighted estimator: model_f must be the logistic case-control fit with the
// intercept already corrected; model_g the cohort fit.
WeightedReport estimate_weighted(const EstimatorInputs& inputs,
                                 const CaseControlSpec& spec, double alpha);

// End-to-end: logistic CV fit on the case-control study, intercept
// correction, cohort fit, weighted estimate. pi1 defaults to the observed
// case fraction when not supplied.
WeightedReport run_case_control(const AlignedData& data, GlmFamily family_g,
                                const FitConfig& fit_config, double prevalence,
                                std::optional<double> pi1, double alpha,
                                std::uint64_t seed);

}  // namespace gencov

#endif
