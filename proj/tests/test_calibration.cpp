#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cusal/calibration.hpp"
#include "cusal/rng.hpp"
#include "doctest.h"

using namespace cusal;

namespace {

ProbVector random_forecast(RngStream& rng, int dim) {
  std::vector<double> raw(static_cast<std::size_t>(dim));
  for (auto& v : raw) v = 0.05 + rng.uniform01();
  return ProbVector::from_raw(std::move(raw));
}

// Direct-space reimplementation of the kernel-ratio estimator in extended
// precision. Only valid at moderate bandwidth where exp(log kernel) cannot
// overflow; the production code works in shifted log space instead.
std::vector<double> naive_per_sample(const std::vector<ProbVector>& pool,
                                     const std::vector<ProbVector>& labeled,
                                     const std::vector<int>& labels,
                                     const CalibrationConfig& cfg) {
  const int dim = pool.front().dim();
  std::vector<double> out;
  out.reserve(pool.size());
  for (const ProbVector& target : pool) {
    std::vector<long double> num(static_cast<std::size_t>(dim), 0.0L);
    long double den = 0.0L;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      long double lk = 0.0L;
      long double alpha_sum = 0.0L;
      for (int k = 0; k < dim; ++k) {
        const long double a =
            static_cast<long double>(labeled[i][k]) / cfg.bandwidth + 1.0L;
        alpha_sum += a;
        lk -= lgammal(a);
        lk += (a - 1.0L) * logl(static_cast<long double>(target[k]));
      }
      lk += lgammal(alpha_sum);
      const long double w = expl(lk);
      num[static_cast<std::size_t>(labels[i])] += w;
      den += w;
    }
    den = std::max(den, static_cast<long double>(cfg.denominator_floor));
    long double err = 0.0L;
    for (int k = 0; k < dim; ++k) {
      const long double d =
          fabsl(num[static_cast<std::size_t>(k)] / den - static_cast<long double>(target[k]));
      long double term = d;
      for (int e = 1; e < cfg.p; ++e) term *= d;
      err += term;
    }
    out.push_back(static_cast<double>(err));
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("calibration");

TEST_CASE("kernel concentrations follow alpha = center / b + 1") {
  const ProbVector centers[] = {ProbVector::from_raw({0.5, 0.25, 0.25})};
  const DirichletKernel kernel(centers, 0.1);
  CHECK(kernel.n_centers() == 1);
  CHECK(kernel.dim() == 3);
  const auto a = kernel.concentration(0);
  CHECK(a[0] == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(a[2] == doctest::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("log kernel reproduces extended-precision reference values") {
  // frozen from a 30-digit mpmath evaluation of
  // lnG(sum a) - sum lnG(a_k) + sum (a_k - 1) ln t_k, a = center / b + 1
  const auto half = ProbVector::from_raw({0.5, 0.5});
  CHECK(dirichlet_log_kernel(half, half, 1.0) ==
        doctest::Approx(0.24156447527049044469).epsilon(1e-13));

  const auto t = ProbVector::from_raw({0.6, 0.3, 0.1});
  const auto c = ProbVector::from_raw({0.5, 0.25, 0.25});
  CHECK(dirichlet_log_kernel(t, c, 0.1) ==
        doctest::Approx(1.477252686055784098).epsilon(1e-12));
  CHECK(dirichlet_log_kernel(c, t, 0.1) ==
        doctest::Approx(1.9121432865844958218).epsilon(1e-12));
}

TEST_CASE("huge bandwidth flattens the kernel to ~ uniform") {
  const auto t = ProbVector::from_raw({0.8, 0.2});
  const auto c = ProbVector::from_raw({0.3, 0.7});
  CHECK(std::fabs(dirichlet_log_kernel(t, c, 1e9)) < 1e-5);
}

TEST_CASE("precomputed kernel agrees with the one-off evaluation") {
  RngStream rng(101);
  std::vector<ProbVector> centers;
  for (int i = 0; i < 8; ++i) centers.push_back(random_forecast(rng, 4));
  const DirichletKernel kernel(centers, 0.05);
  for (int rep = 0; rep < 20; ++rep) {
    const auto target = random_forecast(rng, 4);
    std::vector<double> lt(4);
    for (int k = 0; k < 4; ++k) lt[static_cast<std::size_t>(k)] = std::log(target[k]);
    for (int i = 0; i < 8; ++i)
      CHECK(kernel.log_kernel(lt, i) ==
            doctest::Approx(dirichlet_log_kernel(target, centers[static_cast<std::size_t>(i)], 0.05))
                .epsilon(1e-12));
  }
}

TEST_CASE("log kernel matches a long-double oracle across dims and bandwidths") {
  RngStream rng(103);
  const int dims[] = {2, 3, 10};
  const double bands[] = {1.0, 0.1, 0.001};
  for (int rep = 0; rep < 120; ++rep) {
    const int dim = dims[rep % 3];
    const double b = bands[(rep / 3) % 3];
    const auto target = random_forecast(rng, dim);
    const auto center = random_forecast(rng, dim);
    long double lk = 0.0L, asum = 0.0L;
    for (int k = 0; k < dim; ++k) {
      const long double a = static_cast<long double>(center[k]) / b + 1.0L;
      asum += a;
      lk += (a - 1.0L) * logl(static_cast<long double>(target[k])) - lgammal(a);
    }
    lk += lgammal(asum);
    const double got = dirichlet_log_kernel(target, center, b);
    CHECK(got == doctest::Approx(static_cast<double>(lk)).epsilon(1e-9));
  }
}

TEST_CASE("kernel rejects bad inputs") {
  const auto p2 = ProbVector::from_raw({0.5, 0.5});
  const auto p3 = ProbVector::from_raw({0.4, 0.3, 0.3});
  CHECK_THROWS_AS(dirichlet_log_kernel(p2, p3, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(dirichlet_log_kernel(p2, p2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(dirichlet_log_kernel(p2, p2, -1.0), std::invalid_argument);
  std::vector<ProbVector> none;
  CHECK_THROWS_WITH_AS(DirichletKernel(none, 0.1), doctest::Contains("empty labeled"),
                       std::invalid_argument);
}

TEST_CASE("a single labeled point pulls the estimate to its one-hot label") {
  const std::vector<ProbVector> labeled{ProbVector::from_raw({0.7, 0.3})};
  const std::vector<int> labels{0};
  const CalibrationConfig cfg;
  const auto ratio = conditional_expectation_estimate(labeled, labeled, labels, cfg);
  CHECK(ratio.rows() == 1);
  CHECK(ratio.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ratio.at(0, 1) == doctest::Approx(0.0).epsilon(1).scale(1e-12));

  const auto err = per_sample_calibration_error(labeled, labeled, labels, cfg);
  CHECK(err[0] == doctest::Approx(0.6).epsilon(1e-12));  // |1-0.7| + |0-0.3|

  CalibrationConfig sq = cfg;
  sq.p = 2;
  const auto err2 = per_sample_calibration_error(labeled, labeled, labels, sq);
  CHECK(err2[0] == doctest::Approx(0.18).epsilon(1e-12));  // 0.3^2 + 0.3^2
}

TEST_CASE("identical forecasts reduce the estimate to the label frequency") {
  std::vector<ProbVector> labeled(10, ProbVector::from_raw({0.7, 0.3}));
  std::vector<int> labels(10, 0);
  labels[7] = labels[8] = labels[9] = 1;
  const CalibrationConfig cfg;
  const auto ratio = conditional_expectation_estimate(labeled, labeled, labels, cfg);
  for (std::size_t j = 0; j < 10; ++j) {
    CHECK(ratio.at(j, 0) == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(ratio.at(j, 1) == doctest::Approx(0.3).epsilon(1e-14));
  }
  // frequency equals the forecast, so this set is perfectly calibrated
  const auto err = per_sample_calibration_error(labeled, labeled, labels, cfg);
  for (double e : err) CHECK(e == doctest::Approx(0.0).epsilon(1).scale(1e-13));
  CHECK(canonical_ce_estimate(labeled, labels, cfg) ==
        doctest::Approx(0.0).epsilon(1).scale(1e-13));
}

TEST_CASE("estimate rows are convex combinations of one-hot labels") {
  RngStream rng(107);
  std::vector<ProbVector> labeled;
  std::vector<int> labels;
  for (int i = 0; i < 25; ++i) {
    labeled.push_back(random_forecast(rng, 3));
    labels.push_back(static_cast<int>(rng.below(3)));
  }
  std::vector<ProbVector> pool;
  for (int j = 0; j < 12; ++j) pool.push_back(random_forecast(rng, 3));
  CalibrationConfig cfg;
  cfg.bandwidth = 0.01;
  const auto ratio = conditional_expectation_estimate(pool, labeled, labels, cfg);
  for (std::size_t j = 0; j < pool.size(); ++j) {
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) {
      CHECK(ratio.at(j, static_cast<std::size_t>(k)) >= 0.0);
      sum += ratio.at(j, static_cast<std::size_t>(k));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("canonical estimate of a single point and self-consistency") {
  const std::vector<ProbVector> one{ProbVector::from_raw({0.7, 0.3})};
  const std::vector<int> label{0};
  const CalibrationConfig cfg;
  CHECK(canonical_ce_estimate(one, label, cfg) == doctest::Approx(0.6).epsilon(1e-12));

  RngStream rng(109);
  std::vector<ProbVector> set;
  std::vector<int> labels;
  for (int i = 0; i < 15; ++i) {
    set.push_back(random_forecast(rng, 3));
    labels.push_back(static_cast<int>(rng.below(3)));
  }
  CalibrationConfig c2;
  c2.bandwidth = 0.1;
  const auto per = per_sample_calibration_error(set, set, labels, c2);
  const double mean = std::accumulate(per.begin(), per.end(), 0.0) / 15.0;
  CHECK(canonical_ce_estimate(set, labels, c2) == mean);
}

TEST_CASE("per-sample estimates match a direct-space long-double oracle") {
  RngStream rng(113);
  for (int inst = 0; inst < 40; ++inst) {
    const int dim = 2 + static_cast<int>(rng.below(4));
    const int n = 1 + static_cast<int>(rng.below(40));
    const int m = 1 + static_cast<int>(rng.below(15));
    CalibrationConfig cfg;
    cfg.bandwidth = 0.05 + rng.uniform01() * 0.95;
    cfg.p = 1 + static_cast<int>(rng.below(2));
    std::vector<ProbVector> labeled, pool;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      labeled.push_back(random_forecast(rng, dim));
      labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(dim))));
    }
    for (int j = 0; j < m; ++j) pool.push_back(random_forecast(rng, dim));

    const auto got = per_sample_calibration_error(pool, labeled, labels, cfg);
    const auto want = naive_per_sample(pool, labeled, labels, cfg);
    for (int j = 0; j < m; ++j)
      CHECK(got[static_cast<std::size_t>(j)] ==
            doctest::Approx(want[static_cast<std::size_t>(j)]).epsilon(1).scale(1e-9));
  }
}

TEST_CASE("per-sample output is invariant to the labeled-set order") {
  RngStream rng(127);
  std::vector<ProbVector> labeled, pool;
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) {
    labeled.push_back(random_forecast(rng, 3));
    labels.push_back(static_cast<int>(rng.below(3)));
  }
  for (int j = 0; j < 10; ++j) pool.push_back(random_forecast(rng, 3));
  CalibrationConfig cfg;
  cfg.bandwidth = 0.1;
  const auto base = per_sample_calibration_error(pool, labeled, labels, cfg);

  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<ProbVector> labeled2;
  std::vector<int> labels2;
  for (int i : perm) {
    labeled2.push_back(labeled[static_cast<std::size_t>(i)]);
    labels2.push_back(labels[static_cast<std::size_t>(i)]);
  }
  const auto shuffled = per_sample_calibration_error(pool, labeled2, labels2, cfg);
  for (std::size_t j = 0; j < pool.size(); ++j)
    CHECK(shuffled[j] == doctest::Approx(base[j]).epsilon(1).scale(1e-12));
}

TEST_CASE("estimator input validation") {
  const std::vector<ProbVector> one{ProbVector::from_raw({0.6, 0.4})};
  const std::vector<int> label{0};
  const CalibrationConfig cfg;
  std::vector<ProbVector> none;
  std::vector<int> nolab;
  CHECK_THROWS_AS(conditional_expectation_estimate(one, none, nolab, cfg),
                  std::invalid_argument);
  std::vector<int> toomany{0, 1};
  CHECK_THROWS_AS(conditional_expectation_estimate(one, one, toomany, cfg),
                  std::invalid_argument);
  std::vector<int> bad{2};
  CHECK_THROWS_WITH_AS(conditional_expectation_estimate(one, one, bad, cfg),
                       doctest::Contains("label out of range"), std::invalid_argument);
  CalibrationConfig p0;
  p0.p = 0;
  CHECK_THROWS_AS(per_sample_calibration_error(one, one, label, p0),
                  std::invalid_argument);
}

TEST_CASE("binned calibration error on hand-checkable sets") {
  const EceConfig cfg;  // 10 bins
  // all confident and correct
  std::vector<ProbVector> sure(4, ProbVector::from_raw({1.0, 0.0}));
  std::vector<int> right(4, 0);
  CHECK(expected_calibration_error(sure, right, cfg) ==
        doctest::Approx(0.0).epsilon(1).scale(1e-9));

  // all confident, half correct
  std::vector<int> half{0, 0, 1, 1};
  CHECK(expected_calibration_error(sure, half, cfg) ==
        doctest::Approx(0.5).epsilon(1e-9));

  // confidences 0.55 / 0.65 / 0.95 / 0.95, correctness 1 0 1 1:
  // bins contribute 0.25*0.45 + 0.25*0.65 + 0.5*0.05 = 0.30
  std::vector<ProbVector> mixed{
      ProbVector::from_raw({0.55, 0.45}), ProbVector::from_raw({0.65, 0.35}),
      ProbVector::from_raw({0.95, 0.05}), ProbVector::from_raw({0.95, 0.05})};
  std::vector<int> truth{0, 1, 0, 0};
  CHECK(expected_calibration_error(mixed, truth, cfg) ==
        doctest::Approx(0.30).epsilon(1e-12));
}

TEST_CASE("binned calibration error is bounded and order-free") {
  RngStream rng(131);
  std::vector<ProbVector> fc;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    fc.push_back(random_forecast(rng, 4));
    labels.push_back(static_cast<int>(rng.below(4)));
  }
  const EceConfig cfg;
  const double e = expected_calibration_error(fc, labels, cfg);
  CHECK(e >= 0.0);
  CHECK(e <= 1.0);

  std::vector<int> perm(200);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<ProbVector> fc2;
  std::vector<int> lab2;
  for (int i : perm) {
    fc2.push_back(fc[static_cast<std::size_t>(i)]);
    lab2.push_back(labels[static_cast<std::size_t>(i)]);
  }
  CHECK(expected_calibration_error(fc2, lab2, cfg) ==
        doctest::Approx(e).epsilon(1).scale(1e-12));

  EceConfig single;
  single.n_bins = 1;
  // one bin: |mean conf - accuracy|
  double conf = 0.0, acc = 0.0;
  for (int i = 0; i < 200; ++i) {
    conf += fc[static_cast<std::size_t>(i)].max_prob();
    acc += fc[static_cast<std::size_t>(i)].argmax() == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  }
  CHECK(expected_calibration_error(fc, labels, single) ==
        doctest::Approx(std::fabs(conf - acc) / 200.0).epsilon(1e-12));

  std::vector<ProbVector> none;
  std::vector<int> nolab;
  CHECK_THROWS_AS(expected_calibration_error(none, nolab, cfg), std::invalid_argument);
  EceConfig zero;
  zero.n_bins = 0;
  CHECK_THROWS_AS(expected_calibration_error(fc, labels, zero), std::invalid_argument);
}

TEST_SUITE_END();
