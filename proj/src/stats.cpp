#include "mvfr/stats.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "mvfr/errors.hpp"

namespace mvfr {

double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a stray +inf/NaN surfaces as-is)
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

double logpdf_normal_iso_sq(double sq_norm, Eigen::Index p, double var) {
  if (p < 1 || !(var > 0.0)) throw ConfigError("logpdf_normal_iso: need p >= 1, var > 0");
  const double pd = static_cast<double>(p);
  return -0.5 * pd * std::log(2.0 * std::numbers::pi * var) - 0.5 * sq_norm / var;
}

double logpdf_normal_iso(const Eigen::VectorXd& x, double var) {
  return logpdf_normal_iso_sq(x.squaredNorm(), x.size(), var);
}

double logpdf_mvt_iso_sq(double sq_norm, Eigen::Index p, double df, double scale) {
  if (p < 1 || !(df > 0.0) || !(scale > 0.0))
    throw ConfigError("logpdf_mvt_iso: need p >= 1, df > 0, scale > 0");
  const double pd = static_cast<double>(p);
  return std::lgamma(0.5 * (df + pd)) - std::lgamma(0.5 * df) -
         0.5 * pd * std::log(df * std::numbers::pi * scale) -
         0.5 * (df + pd) * std::log1p(sq_norm / (df * scale));
}

double logpdf_mvt_iso(const Eigen::VectorXd& x, double df, double scale) {
  return logpdf_mvt_iso_sq(x.squaredNorm(), x.size(), df, scale);
}

double std_normal_cdf(double z) {
  return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0);
}

// Rational approximation of the probit (Wichura's PPND16 scheme): central
// rational on |p-1/2| <= 0.425, two log-scale tail regimes beyond.
double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("std_normal_quantile: p must be in (0,1)");
  static const double a[8] = {
      3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3};
  static const double b[8] = {
      1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3};
  static const double c[8] = {
      1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static const double d[8] = {
      1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9};
  static const double e[8] = {
      6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static const double f[8] = {
      1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15};
  auto ratio = [](const double* num, const double* den, double r) {
    double n = num[7], m = den[7];
    for (int i = 6; i >= 0; --i) {
      n = n * r + num[i];
      m = m * r + den[i];
    }
    return n / m;
  };
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * ratio(a, b, r);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    x = ratio(c, d, r - 1.6);
  } else {
    x = ratio(e, f, r - 5.0);
  }
  return (q < 0.0) ? -x : x;
}

}  // namespace mvfr
