#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cusal/matrix.hpp"
#include "cusal/prob.hpp"
#include "cusal/rng.hpp"

namespace cusal {

/// Per-pool-sample inputs to the score-based strategies. `calibration` holds
/// the estimated per-sample calibration errors (set A), `confidence` the
/// max-class probabilities (set B).
struct AcquisitionScores {
  std::vector<double> calibration;
  std::vector<double> confidence;
};

enum class SelectionReason {
  kDistinctCalibration,
  kTieBrokenByUncertainty,
  kStrategySpecific,
};

/// A batch of query indices into the current pool, with a per-index tag
/// recording whether calibration alone determined membership or the
/// uncertainty tie-break did.
struct QueryResult {
  std::vector<int> indices;
  std::vector<SelectionReason> reasons;
  std::string note;  // strategy diagnostics, e.g. degenerate-input fallbacks

  int count(SelectionReason r) const;
};

/// Grain at which two calibration scores count as tied. Significant-digit
/// rounding is the default; a non-negative `decimals` switches to absolute
/// decimal rounding instead. `significant_digits < 1` with `decimals < 0`
/// means exact float equality.
struct TieRule {
  int significant_digits = 12;
  int decimals = -1;

  double round(double x) const;

  friend bool operator==(const TieRule&, const TieRule&) = default;
};

/// Calibration-first selection: order pool samples by descending rounded
/// calibration error; inside a tie group ascending confidence wins; remaining
/// ties fall back to ascending pool index. The first k win. A selected sample
/// is tagged tie-broken-by-uncertainty when its tie group straddles the
/// selection boundary (some group members were left out, so the confidence
/// key decided membership); otherwise distinct-calibration.
QueryResult cusal_select(const AcquisitionScores& scores, int k,
                         const TieRule& tie = {});

/// k distinct uniform pool indices, in draw order.
QueryResult random_select(int m, int k, RngStream& rng);

/// k smallest max-class probabilities; ties by ascending index.
QueryResult least_confident_select(std::span<const ProbVector> forecasts, int k);

/// k smallest top-two probability gaps; ties by ascending index.
QueryResult margin_select(std::span<const ProbVector> forecasts, int k);

/// k largest predictive entropies; ties by ascending index.
QueryResult entropy_select(std::span<const ProbVector> forecasts, int k);

/// Mutual-information scores from MC-dropout forecasts, layout [S][m]:
/// score_j = H[mean_s p_sj] - mean_s H[p_sj]. Requires S >= 2 slices.
QueryResult bald_select(const std::vector<std::vector<ProbVector>>& mc_forecasts,
                        int k);

/// k-center greedy on embeddings: repeatedly take the pool point farthest
/// from everything already covered (labeled points plus earlier picks), ties
/// by ascending index. An empty labeled set is seeded with pool index 0.
QueryResult coreset_select(const Matrix& embeddings, const Matrix& labeled_embeddings,
                           int k);

/// k-means++ seeding on gradient embeddings: first pick proportional to
/// squared norm, later picks proportional to squared distance from the
/// nearest earlier pick. All-zero embeddings fall back to random selection
/// (noted in the result).
QueryResult badge_select(const Matrix& grad_embeddings, int k, RngStream& rng);

/// A strategy restricted to a candidate subset: receives pool indices and a
/// batch size, must return that many of them.
using SubsetStrategy =
    std::function<QueryResult(std::span<const int> candidates, int n_select)>;

/// Shortlist k_m of the m pool samples with `first`, then pick k among the
/// shortlist with `second`. Reasons and note come from the second stage.
QueryResult two_stage_select(const SubsetStrategy& first, int k_m,
                             const SubsetStrategy& second, int k, int m);

/// Group the given embedding rows into exactly n_clusters clusters by
/// average-linkage agglomeration under Euclidean distance. Returns clusters
/// ordered by ascending size (ties by smallest member row), members in
/// ascending row order.
std::vector<std::vector<int>> average_linkage_clusters(const Matrix& embeddings,
                                                       int n_clusters);

struct ComboWeighting {
  bool adaptive = false;
  double multiplier = 1.0;  // kappa, used only in adaptive mode

  friend bool operator==(const ComboWeighting&, const ComboWeighting&) = default;
};

/// Scalarized combination of the two keys with uncertainty := 1 - confidence.
/// Uniform: rank by (cal + unc) / 2. Adaptive: alpha = mean pool calibration
/// clamped to [0, 1], rank by (kappa alpha cal + unc) / (kappa alpha + 1).
/// Select the k largest, ties by ascending index.
QueryResult weighted_combo_select(const AcquisitionScores& scores,
                                  const ComboWeighting& weighting, int k);

/// k largest calibration scores, ties by ascending index.
QueryResult calibration_only_select(const AcquisitionScores& scores, int k);

}  // namespace cusal
