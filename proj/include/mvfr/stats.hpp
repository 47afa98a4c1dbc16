#pragma once
#include <Eigen/Dense>

namespace mvfr {

double log_sum_exp(const Eigen::VectorXd& v);

// Isotropic normal N(0, var·I_p) log-density; the squared-norm overloads let the
// membership updates evaluate a column norm once and reuse it.
double logpdf_normal_iso(const Eigen::VectorXd& x, double var);
double logpdf_normal_iso_sq(double sq_norm, Eigen::Index p, double var);

// Isotropic multivariate Student-t with df degrees of freedom and scale·I_p scale
// matrix (the collapsed slab density of a loadings column).
double logpdf_mvt_iso(const Eigen::VectorXd& x, double df, double scale);
double logpdf_mvt_iso_sq(double sq_norm, Eigen::Index p, double df, double scale);

double std_normal_cdf(double z);
// Inverse standard normal CDF (rational approximation, |error| < 1e-15 range-wide)
double std_normal_quantile(double p);

}  // namespace mvfr
