#pragma once

// Special functions and distribution tails used by the statistical tests.

namespace promine::special {

// Regularized lower/upper incomplete gamma P(a, x), Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x);

double normal_cdf(double z);
// Inverse of normal_cdf on (0, 1).
double normal_quantile(double p);

// Upper tail P(X > x) for X ~ chi-square(df).
double chi2_sf(double x, double df);
// Two-sided p-value for a Student t statistic.
double t_two_sided_p(double t, double df);
// Upper tail P(F > f) for F ~ F(d1, d2).
double f_sf(double f, double d1, double d2);

}  // namespace promine::special
