#include "cusal/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cusal {

namespace {

// B_{2n} / (2n (2n-1)) for the Stirling correction series.
constexpr double kStirlingCoef[] = {
    1.0 / 12.0,   -1.0 / 360.0,      1.0 / 1260.0, -1.0 / 1680.0,
    1.0 / 1188.0, -691.0 / 360360.0, 1.0 / 156.0,
};
constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // ln(2*pi)/2

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log-gamma domain");
  // Shift into [10, inf) via ln G(x) = ln G(x+1) - ln x, then apply the
  // asymptotic series; 7 terms keep the truncation below 3e-17 at x >= 10.
  double shift = 0.0;
  while (x < 10.0) {
    shift += std::log(x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = kStirlingCoef[6];
  for (int i = 5; i >= 0; --i) series = kStirlingCoef[i] + series * inv2;
  series *= inv;
  return (x - 0.5) * std::log(x) - x + kHalfLogTwoPi + series - shift;
}

double logsumexp(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("logsumexp of empty sequence");
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) {
    // all -inf stays -inf; a +inf or NaN input is propagated as-is
    return m;
  }
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

namespace {

// Continued fraction for the incomplete beta (Numerical-Recipes style
// modified Lentz iteration).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("beta parameters");
  if (x < 0.0 || x > 1.0) throw std::domain_error("beta argument");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::domain_error("degrees of freedom");
  if (!std::isfinite(t)) return 0.0;
  if (t == 0.0) return 1.0;
  return reg_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

}  // namespace cusal
