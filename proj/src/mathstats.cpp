#include "gencov/mathstats.hpp"

namespace gencov {

double normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    fail(ErrorKind::config, "normal_quantile: q must lie strictly in (0,1)");
  }
  // Reflect the upper half onto the lower: 1 - q is exact for q in [0.5, 1]
  // and the erfc-based CDF is accurate only in the lower tail.
  if (q > 0.5) return -normal_quantile(1.0 - q);

  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};

  const double p_low = 0.02425;
  double x;
  if (q < p_low) {
    const double u = std::sqrt(-2.0 * std::log(q));
    x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  } else {
    const double u = q - 0.5;
    const double r = u * u;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        u /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }

  // One Newton step on Phi(x) - q = 0; x <= 0 here, where the erfc form of
  // the CDF carries full relative accuracy.
  const double err = normal_cdf(x) - q;
  const double dens = normal_pdf(x);
  if (dens > 0.0) x -= err / dens;
  return x;
}

}  // namespace gencov
