#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cusal/experiment_config.hpp"
#include "cusal/matrix.hpp"

namespace cusal {

/// The labeled set S_t. Grows by the revealed batch each round; provenance
/// records the round at which each sample arrived (0 = warm-up).
struct LabeledSet {
  Matrix features;
  std::vector<int> labels;
  std::vector<int> acquired_round;

  int size() const { return static_cast<int>(labels.size()); }
  void add(std::span<const double> x, int y, int round);
};

/// The unlabeled pool U_t with its simulated oracle. Acquisition code only
/// ever sees `features()`; labels leave the pool exclusively through
/// `reveal`, which also removes the samples. `evaluation_labels()` exists for
/// diagnostic metrics (pool ECE, estimator-gap study) and must not feed any
/// selection decision.
class PoolSet {
 public:
  PoolSet(Matrix features, std::vector<int> hidden_labels);

  int size() const { return static_cast<int>(remaining_.size()); }
  const Matrix& features() const { return compact_features_; }

  /// Oracle query: returns the labels for the given pool positions (in input
  /// order) and removes those samples from the pool. Throws on duplicate or
  /// already-revealed samples.
  std::vector<int> reveal(const std::vector<int>& positions);

  /// Hidden labels of the current pool, aligned with features(). Diagnostics
  /// only.
  const std::vector<int>& evaluation_labels() const { return compact_labels_; }

 private:
  void rebuild();

  Matrix all_features_;
  std::vector<int> all_labels_;
  std::vector<bool> revealed_;
  std::vector<int> remaining_;  // pool position -> original row
  Matrix compact_features_;
  std::vector<int> compact_labels_;
};

/// Metrics captured after each (re)training. Round 0 is the warm-up-only
/// state; rounds 1..T follow one query batch each.
struct RoundRecord {
  int round = 0;
  int n_labeled = 0;
  int pool_size = 0;
  double test_acc = 0.0;
  double test_ece = 0.0;
  double pool_ece = 0.0;                 // diagnostic, uses hidden labels
  double mean_pool_cal_estimate = 0.0;
  int n_cal_selected = 0;                // calibration-first strategy only
  int n_unc_selected = 0;
  double wallclock_s = 0.0;
};

/// Run one (strategy, seed) replica of the experiment loop. When `gap_curve`
/// is given, it receives one entry per query round: the mean absolute
/// difference between the hidden-label per-sample calibration estimate and
/// the label-revealed variant computed over pool plus labeled references.
std::vector<RoundRecord> run_replica(const ExperimentConfig& cfg,
                                     const std::string& strategy,
                                     std::uint64_t seed,
                                     std::vector<double>* gap_curve = nullptr);

/// The gap curve alone, for estimator-quality studies.
std::vector<double> estimator_gap_study(const ExperimentConfig& cfg,
                                        const std::string& strategy,
                                        std::uint64_t seed);

/// Mean absolute difference between per-sample calibration estimates computed
/// from labeled references only and from pool plus labeled references with
/// the pool's true labels. The quantity the gap curve tracks per round.
double estimator_gap(const std::vector<ProbVector>& pool_fc,
                     const std::vector<ProbVector>& labeled_fc,
                     const std::vector<int>& labeled_labels,
                     const std::vector<int>& pool_labels,
                     const CalibrationConfig& cal);

/// One strategy's replicas, one record sequence per seed.
struct StrategyRuns {
  std::string strategy;
  std::vector<std::vector<RoundRecord>> per_seed;
};

struct MetricSummary {
  std::vector<double> mean;    // per round
  std::vector<double> stddev;  // empty when fewer than 2 seeds
};

struct StrategySummary {
  std::string strategy;
  MetricSummary test_acc;
  MetricSummary test_ece;
  MetricSummary pool_ece;
};

struct WelchResult {
  std::string metric;
  int round = 0;
  std::string strategy_a;
  std::string strategy_b;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double p_value = 1.0;
};

struct RunSummary {
  int rounds = 0;  // T
  std::vector<StrategySummary> strategies;
  std::vector<WelchResult> welch;
};

/// Per-round mean and (n-1)-denominator standard deviation across seeds, plus
/// pairwise Welch two-sided t-tests on test accuracy and test ECE at rounds
/// {T/4, T/2, 3T/4, T}. All replicas must have equal length.
RunSummary aggregate(const std::vector<StrategyRuns>& runs);

/// Welch's unequal-variance two-sided t-test. Degenerate inputs (zero pooled
/// variance) give p = 1 for equal means and p = 0 otherwise.
double welch_p_value(std::span<const double> a, std::span<const double> b);

}  // namespace cusal
