#pragma once

namespace sievekit {

double normal_cdf(double x);

/// Inverse standard normal CDF. Rational approximation with one Halley
/// correction step; absolute error well below 1e-9 on (0, 1).
double normal_quantile(double p);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double x, double a, double b);

/// CDF of the F(d1, d2) distribution.
double f_cdf(double x, double d1, double d2);

/// Quantile of the F(d1, d2) distribution by bisection on the regularized
/// incomplete beta (200 iterations max, CDF tolerance 1e-12).
/// Throws DomainError for p outside (0, 1) or nonpositive degrees of freedom.
double f_quantile(double p, double d1, double d2);

}  // namespace sievekit
