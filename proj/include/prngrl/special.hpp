#pragma once

namespace prngrl {

/// Complementary error function.
double erfc(double x);

/// Regularized upper incomplete gamma function Q(a, x) = Gamma(a, x) / Gamma(a),
/// a > 0, x >= 0. Series below x < a + 1, Lentz continued fraction above;
/// relative error <= 1e-10 over the ranges the battery uses.
double igamc(double a, double x);

/// Standard normal CDF.
double normal_cdf(double x);

}  // namespace prngrl
