#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace rsum::special {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Upper tail 1 - Phi(x), accurate for large positive x.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// Antiderivative of Phi with Psi(-inf) = 0.
inline double normal_cdf_integral(double x) { return x * normal_cdf(x) + normal_pdf(x); }

// Integral of 1 - Phi over [x, inf).
inline double normal_sf_integral(double x) { return normal_pdf(x) - x * normal_sf(x); }

// Inverse of Phi. Acklam's rational approximation refined by two Halley steps.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("normal_quantile: p outside [0,1]");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int i = 0; i < 2; ++i) {
    double e = (p < 0.5) ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
    double u = e / normal_pdf(x);
    x = x - u / (1.0 + 0.5 * x * u);
  }
  return x;
}

namespace detail {

constexpr double kGammaEps = 1e-15;
constexpr int kGammaMaxIter = 100000;

// Series for P(a,x), valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < kGammaMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kGammaEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a,x), valid for x >= a + 1.
inline double gamma_q_cf(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kGammaMaxIter; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kGammaEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("gamma_p: shape must be positive");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_cf(a, x);
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("gamma_q: shape must be positive");
  if (x <= 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_cf(a, x);
}

// Gamma(shape, rate) helpers.
inline double gamma_cdf(double shape, double rate, double x) { return gamma_p(shape, rate * x); }
inline double gamma_sf(double shape, double rate, double x) { return gamma_q(shape, rate * x); }

inline double gamma_pdf(double shape, double rate, double x) {
  if (x <= 0.0) return 0.0;
  return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x -
                  std::lgamma(shape));
}

// Quantile by bracketed bisection on the CDF.
inline double gamma_quantile(double shape, double rate, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("gamma_quantile: p outside (0,1)");
  double lo = 0.0;
  double hi = (shape + 10.0 * std::sqrt(shape) + 10.0) / rate;
  while (gamma_cdf(shape, rate, hi) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
    double mid = 0.5 * (lo + hi);
    (gamma_cdf(shape, rate, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// E(Z - a)_+ for Z ~ Gamma(shape, rate).
inline double gamma_stoploss(double shape, double rate, double a) {
  double mean = shape / rate;
  if (a <= 0.0) return mean - a;
  return mean * gamma_sf(shape + 1.0, rate, a) - a * gamma_sf(shape, rate, a);
}

// E(Z - a)_+ for Z ~ N(mu, sd^2).
inline double normal_stoploss(double mu, double sd, double a) {
  double z = (a - mu) / sd;
  return (mu - a) * normal_sf(z) + sd * normal_pdf(z);
}

}  // namespace rsum::special
