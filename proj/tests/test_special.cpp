#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cusal/rng.hpp"
#include "cusal/special.hpp"
#include "doctest.h"

using namespace cusal;

TEST_SUITE_BEGIN("numerics");

TEST_CASE("log_gamma reproduces extended-precision reference values") {
  // frozen from mpmath at 25 digits
  CHECK(log_gamma(1.0) == doctest::Approx(0.0).epsilon(1).scale(1e-13));
  CHECK(log_gamma(2.0) == doctest::Approx(0.0).epsilon(1).scale(1e-13));
  CHECK(log_gamma(0.5) == doctest::Approx(0.57236494292470008707).epsilon(1e-13));
  CHECK(log_gamma(2.5) == doctest::Approx(0.28468287047291915963).epsilon(1e-13));
  CHECK(log_gamma(1e-3) == doctest::Approx(6.9071788853838536825).epsilon(1e-13));
  CHECK(log_gamma(1001.0) == doctest::Approx(5912.1281784881633489).epsilon(1e-13));
}

TEST_CASE("log_gamma satisfies the recurrence ln G(x+1) = ln G(x) + ln x") {
  RngStream r(21);
  for (int i = 0; i < 500; ++i) {
    const double x = 1e-3 + r.uniform01() * 50.0;
    const double lhs = log_gamma(x + 1.0);
    const double rhs = log_gamma(x) + std::log(x);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
  }
}

TEST_CASE("log_gamma rejects the closed half-line x <= 0") {
  CHECK_THROWS_WITH_AS(log_gamma(0.0), doctest::Contains("log-gamma domain"),
                       std::domain_error);
  CHECK_THROWS_AS(log_gamma(-2.5), std::domain_error);
}

TEST_CASE("logsumexp handles shifts, empties and -inf") {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> v{1.0, 2.0, 3.0};
  CHECK(logsumexp(v) == doctest::Approx(3.4076059644443803045).epsilon(1e-14));

  std::vector<double> two{0.0, 0.0};
  CHECK(logsumexp(two) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  std::vector<double> small{-1000.0, -1000.0};
  CHECK(logsumexp(small) == doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-15));

  std::vector<double> big{1000.0, 1000.0};
  CHECK(std::isfinite(logsumexp(big)));

  std::vector<double> allneg{-inf, -inf};
  CHECK(logsumexp(allneg) == -inf);

  std::vector<double> empty;
  CHECK_THROWS_AS(logsumexp(empty), std::invalid_argument);

  RngStream r(31);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> xs(5);
    double mx = -inf;
    for (auto& x : xs) {
      x = (r.uniform01() - 0.5) * 2000.0;
      mx = std::max(mx, x);
    }
    CHECK(logsumexp(xs) >= mx);
    CHECK(logsumexp(xs) <= mx + std::log(5.0) + 1e-12);
  }
}

TEST_CASE("reg_incomplete_beta matches reference values") {
  // frozen from scipy.special.betainc
  CHECK(reg_incomplete_beta(0.5, 0.5, 0.3) ==
        doctest::Approx(0.36901011956554537504).epsilon(1e-12));
  CHECK(reg_incomplete_beta(2.0, 3.0, 0.4) == doctest::Approx(0.5248).epsilon(1e-12));
  CHECK(reg_incomplete_beta(5.0, 1.0, 0.8) == doctest::Approx(0.32768).epsilon(1e-12));
  CHECK(reg_incomplete_beta(2.5, 0.5, 0.9) ==
        doctest::Approx(0.48958974456442755456).epsilon(1e-12));
  CHECK(reg_incomplete_beta(1.0, 1.0, 0.25) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(reg_incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(reg_incomplete_beta(2.0, 3.0, 1.0) == 1.0);
}

TEST_CASE("reg_incomplete_beta respects the reflection identity") {
  RngStream r(41);
  for (int i = 0; i < 200; ++i) {
    const double a = 0.2 + r.uniform01() * 5.0;
    const double b = 0.2 + r.uniform01() * 5.0;
    const double x = r.uniform01();
    const double s = reg_incomplete_beta(a, b, x) + reg_incomplete_beta(b, a, 1.0 - x);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("student_t_two_sided_p matches reference values") {
  // frozen from scipy.stats.t.sf
  CHECK(student_t_two_sided_p(2.0, 10.0) ==
        doctest::Approx(0.07338803477074039).epsilon(1e-10));
  CHECK(student_t_two_sided_p(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(student_t_two_sided_p(2.5, 4.7) ==
        doctest::Approx(0.05759215934686727).epsilon(1e-10));
  CHECK(student_t_two_sided_p(0.5, 30.0) ==
        doctest::Approx(0.6207230048851273).epsilon(1e-10));
  CHECK(student_t_two_sided_p(3.2, 7.0) ==
        doctest::Approx(0.015065811342489297).epsilon(1e-10));
  CHECK(student_t_two_sided_p(0.0, 12.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("student_t_two_sided_p is symmetric and monotone in |t|") {
  RngStream r(51);
  for (int i = 0; i < 100; ++i) {
    const double t = (r.uniform01() - 0.5) * 10.0;
    const double df = 1.0 + r.uniform01() * 40.0;
    const double p = student_t_two_sided_p(t, df);
    CHECK(p == doctest::Approx(student_t_two_sided_p(-t, df)).epsilon(1e-12));
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(student_t_two_sided_p(std::fabs(t) + 1.0, df) <= p + 1e-12);
  }
}

TEST_SUITE_END();
