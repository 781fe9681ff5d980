#pragma once

#include <span>
#include <vector>

#include "cusal/matrix.hpp"
#include "cusal/prob.hpp"

namespace cusal {

/// Knobs of the kernel calibration-error estimator.
struct CalibrationConfig {
  int p = 1;                         // norm exponent of the per-sample error
  double bandwidth = 0.001;          // Dirichlet kernel bandwidth b
  double denominator_floor = 1e-10;  // clamp on the kernel-weight sum

  friend bool operator==(const CalibrationConfig&, const CalibrationConfig&) = default;
};

struct EceConfig {
  int n_bins = 10;  // equal-width bins on max confidence

  friend bool operator==(const EceConfig&, const EceConfig&) = default;
};

/// Dirichlet kernel density on the simplex with precomputed per-center
/// concentrations alpha_i = center_i / b + 1 and log-normalizers. Centers are
/// the labeled-set forecasts; evaluating at a target costs K multiply-adds.
class DirichletKernel {
 public:
  DirichletKernel(std::span<const ProbVector> centers, double bandwidth);

  int n_centers() const { return static_cast<int>(log_norm_.size()); }
  int dim() const { return dim_; }
  double bandwidth() const { return bandwidth_; }

  /// ln k(target; center_i) given the precomputed ln(target) coordinates.
  double log_kernel(std::span<const double> log_target, int center) const;

  /// alpha row for one center (tests poke at this).
  std::span<const double> concentration(int center) const {
    return {alpha_.data() + static_cast<std::size_t>(center) * dim_,
            static_cast<std::size_t>(dim_)};
  }

 private:
  int dim_ = 0;
  double bandwidth_ = 0.0;
  std::vector<double> alpha_;     // row-major [n_centers x dim]
  std::vector<double> log_norm_;  // lnG(sum alpha) - sum lnG(alpha_k) per center
};

/// ln k(target; center) for a single pair, evaluated entirely in log space:
/// lnG(sum alpha) - sum lnG(alpha_k) + sum (alpha_k - 1) ln target_k with
/// alpha = center / b + 1. Finite for any forecasts on the clamped simplex.
double dirichlet_log_kernel(const ProbVector& target, const ProbVector& center,
                            double bandwidth);

/// Kernel-ratio estimate of E[Y | h(x_j)] for every pool forecast: row j is
/// sum_i k(h(x_j); h(x_i)) onehot(y_i) / sum_i k(h(x_j); h(x_i)), with the
/// denominator clamped from below. Sums are shifted by the per-row maximum
/// log kernel before exponentiation so nothing overflows at small bandwidth.
Matrix conditional_expectation_estimate(std::span<const ProbVector> pool_forecasts,
                                        std::span<const ProbVector> labeled_forecasts,
                                        std::span<const int> labels,
                                        const CalibrationConfig& cfg);

/// Per-sample calibration-error estimate on the pool:
/// || ratio_row_j - h(x_j) ||_p^p for every pool forecast j.
std::vector<double> per_sample_calibration_error(
    std::span<const ProbVector> pool_forecasts,
    std::span<const ProbVector> labeled_forecasts, std::span<const int> labels,
    const CalibrationConfig& cfg);

/// Canonical calibration-error estimate of a labeled set: the mean per-sample
/// error with the set acting as both pool and reference (each sample's own
/// kernel term included).
double canonical_ce_estimate(std::span<const ProbVector> forecasts,
                             std::span<const int> labels,
                             const CalibrationConfig& cfg);

/// Binned expected calibration error on max confidence. Equal-width bins over
/// [0, 1], final bin right-inclusive, empty bins contribute zero.
double expected_calibration_error(std::span<const ProbVector> forecasts,
                                  std::span<const int> labels, const EceConfig& cfg);

}  // namespace cusal
