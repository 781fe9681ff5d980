#pragma once

#include <span>

namespace cusal {

/// ln Gamma(x) for x > 0. Stirling series with argument shifting; relative
/// error below 1e-13 over [1e-3, 1e6] (absolute below 1e-13 where the value
/// crosses zero). Throws std::domain_error for x <= 0.
double log_gamma(double x);

/// max(xs) + ln sum exp(xs - max). Empty input throws. Returns -inf only if
/// every input is -inf.
double logsumexp(std::span<const double> xs);

/// Regularized incomplete beta function I_x(a, b), a,b > 0, x in [0,1].
/// Continued-fraction evaluation (Lentz).
double reg_incomplete_beta(double a, double b, double x);

/// Two-sided p-value of a Student-t statistic with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

}  // namespace cusal
