#include "cusal/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cusal/special.hpp"

namespace cusal {

DirichletKernel::DirichletKernel(std::span<const ProbVector> centers, double bandwidth)
    : bandwidth_(bandwidth) {
  if (centers.empty()) throw std::invalid_argument("empty labeled set");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  dim_ = centers.front().dim();
  alpha_.reserve(centers.size() * static_cast<std::size_t>(dim_));
  log_norm_.reserve(centers.size());
  for (const ProbVector& c : centers) {
    if (c.dim() != dim_) throw std::invalid_argument("forecast dimension mismatch");
    double alpha_sum = 0.0;
    double log_gamma_sum = 0.0;
    for (int k = 0; k < dim_; ++k) {
      const double a = c[k] / bandwidth + 1.0;
      alpha_.push_back(a);
      alpha_sum += a;
      log_gamma_sum += log_gamma(a);
    }
    log_norm_.push_back(log_gamma(alpha_sum) - log_gamma_sum);
  }
}

double DirichletKernel::log_kernel(std::span<const double> log_target, int center) const {
  const double* a = alpha_.data() + static_cast<std::size_t>(center) * dim_;
  double s = log_norm_[static_cast<std::size_t>(center)];
  for (int k = 0; k < dim_; ++k) s += (a[k] - 1.0) * log_target[static_cast<std::size_t>(k)];
  return s;
}

double dirichlet_log_kernel(const ProbVector& target, const ProbVector& center,
                            double bandwidth) {
  if (target.dim() != center.dim())
    throw std::invalid_argument("forecast dimension mismatch");
  const ProbVector centers[] = {center};
  DirichletKernel kernel(centers, bandwidth);
  std::vector<double> log_target(target.p.size());
  for (std::size_t k = 0; k < target.p.size(); ++k) log_target[k] = std::log(target.p[k]);
  return kernel.log_kernel(log_target, 0);
}

Matrix conditional_expectation_estimate(std::span<const ProbVector> pool_forecasts,
                                        std::span<const ProbVector> labeled_forecasts,
                                        std::span<const int> labels,
                                        const CalibrationConfig& cfg) {
  if (labeled_forecasts.empty()) throw std::invalid_argument("empty labeled set");
  if (labels.size() != labeled_forecasts.size())
    throw std::invalid_argument("labels/forecasts length mismatch");
  const int n = static_cast<int>(labeled_forecasts.size());
  const int dim = labeled_forecasts.front().dim();
  for (int i = 0; i < n; ++i)
    if (labels[static_cast<std::size_t>(i)] < 0 || labels[static_cast<std::size_t>(i)] >= dim)
      throw std::invalid_argument("label out of range");

  const DirichletKernel kernel(labeled_forecasts, cfg.bandwidth);
  const int m = static_cast<int>(pool_forecasts.size());
  Matrix out(static_cast<std::size_t>(m), static_cast<std::size_t>(dim));

  std::vector<double> log_target(static_cast<std::size_t>(dim));
  std::vector<double> log_kern(static_cast<std::size_t>(n));
  for (int j = 0; j < m; ++j) {
    const ProbVector& target = pool_forecasts[static_cast<std::size_t>(j)];
    if (target.dim() != dim) throw std::invalid_argument("forecast dimension mismatch");
    for (int k = 0; k < dim; ++k)
      log_target[static_cast<std::size_t>(k)] = std::log(target[k]);

    double shift = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      log_kern[static_cast<std::size_t>(i)] = kernel.log_kernel(log_target, i);
      shift = std::max(shift, log_kern[static_cast<std::size_t>(i)]);
    }
    // class-partitioned sums of exp(log k - shift); the shifted denominator is
    // >= 1, so the floor only guards pathological inputs
    double den = 0.0;
    auto row = out.row(static_cast<std::size_t>(j));
    for (int i = 0; i < n; ++i) {
      const double w = std::exp(log_kern[static_cast<std::size_t>(i)] - shift);
      row[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] += w;
      den += w;
    }
    den = std::max(den, cfg.denominator_floor);
    for (int k = 0; k < dim; ++k) row[static_cast<std::size_t>(k)] /= den;
  }
  return out;
}

namespace {

double p_norm_pow(std::span<const double> a, const ProbVector& b, int p) {
  double s = 0.0;
  for (int k = 0; k < b.dim(); ++k) {
    const double d = std::fabs(a[static_cast<std::size_t>(k)] - b[k]);
    double t = d;
    for (int e = 1; e < p; ++e) t *= d;
    s += t;
  }
  return s;
}

}  // namespace

std::vector<double> per_sample_calibration_error(
    std::span<const ProbVector> pool_forecasts,
    std::span<const ProbVector> labeled_forecasts, std::span<const int> labels,
    const CalibrationConfig& cfg) {
  if (cfg.p < 1) throw std::invalid_argument("norm exponent must be >= 1");
  const Matrix ratio =
      conditional_expectation_estimate(pool_forecasts, labeled_forecasts, labels, cfg);
  std::vector<double> out(pool_forecasts.size());
  for (std::size_t j = 0; j < pool_forecasts.size(); ++j)
    out[j] = p_norm_pow(ratio.row(j), pool_forecasts[j], cfg.p);
  return out;
}

double canonical_ce_estimate(std::span<const ProbVector> forecasts,
                             std::span<const int> labels, const CalibrationConfig& cfg) {
  if (forecasts.empty()) throw std::invalid_argument("empty labeled set");
  const std::vector<double> per_sample =
      per_sample_calibration_error(forecasts, forecasts, labels, cfg);
  double s = 0.0;
  for (double v : per_sample) s += v;
  return s / static_cast<double>(per_sample.size());
}

double expected_calibration_error(std::span<const ProbVector> forecasts,
                                  std::span<const int> labels, const EceConfig& cfg) {
  if (forecasts.empty()) throw std::invalid_argument("empty evaluation set");
  if (labels.size() != forecasts.size())
    throw std::invalid_argument("labels/forecasts length mismatch");
  if (cfg.n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");

  const int n_bins = cfg.n_bins;
  std::vector<double> conf_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> acc_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<int> count(static_cast<std::size_t>(n_bins), 0);

  for (std::size_t j = 0; j < forecasts.size(); ++j) {
    const int pred = forecasts[j].argmax();
    const double conf = forecasts[j].max_prob();
    int bin = static_cast<int>(conf * n_bins);
    bin = std::clamp(bin, 0, n_bins - 1);  // right-inclusive final bin
    conf_sum[static_cast<std::size_t>(bin)] += conf;
    acc_sum[static_cast<std::size_t>(bin)] += (pred == labels[j]) ? 1.0 : 0.0;
    ++count[static_cast<std::size_t>(bin)];
  }

  const double n = static_cast<double>(forecasts.size());
  double ece = 0.0;
  for (int b = 0; b < n_bins; ++b) {
    const int c = count[static_cast<std::size_t>(b)];
    if (c == 0) continue;
    const double mean_conf = conf_sum[static_cast<std::size_t>(b)] / c;
    const double mean_acc = acc_sum[static_cast<std::size_t>(b)] / c;
    ece += (c / n) * std::fabs(mean_conf - mean_acc);
  }
  return ece;
}

}  // namespace cusal
