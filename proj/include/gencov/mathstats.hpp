#ifndef GENCOV_MATHSTATS_HPP
#define GENCOV_MATHSTATS_HPP

#include <cmath>

#include "gencov/error.hpp"

namespace gencov {

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.70710678118654752440084436210485);
}

inline double normal_pdf(double x) {
  return 0.39894228040143267793994605993438 * std::exp(-0.5 * x * x);
}

inline double expit(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Inverse standard normal CDF. Rational approximation (Acklam) refined with
// one Newton step against erfc-based normal_cdf; absolute error is well
// below 1e-9 over q in [1e-12, 1-1e-12].
double normal_quantile(double q);

}  // namespace gencov

#endif
