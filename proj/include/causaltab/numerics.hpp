#pragma once

namespace causaltab {

/// Regularized lower incomplete gamma function P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

/// Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

/// Survival function of the chi-squared distribution with df degrees of
/// freedom: P[X >= x].
double chi_squared_sf(double x, double df);

}  // namespace causaltab
