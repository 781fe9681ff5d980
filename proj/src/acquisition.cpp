#include "cusal/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cusal {

int QueryResult::count(SelectionReason r) const {
  int n = 0;
  for (SelectionReason x : reasons)
    if (x == r) ++n;
  return n;
}

double TieRule::round(double x) const {
  if (!std::isfinite(x)) return x;
  if (decimals >= 0) {
    const double scale = std::pow(10.0, decimals);
    return std::round(x * scale) / scale;
  }
  if (significant_digits < 1 || x == 0.0) return x;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*e", significant_digits - 1, x);
  return std::strtod(buf, nullptr);
}

namespace {

void check_batch(int k, int m) {
  if (k < 0) throw std::invalid_argument("negative batch size");
  if (k > m) throw std::invalid_argument("batch larger than pool");
}

std::vector<int> iota_indices(int m) {
  std::vector<int> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

/// Sort all m indices by `before` (a strict total order) and keep the first k.
template <class Before>
QueryResult pick_top(int m, int k, Before before, SelectionReason reason) {
  std::vector<int> idx = iota_indices(m);
  std::sort(idx.begin(), idx.end(), before);
  idx.resize(static_cast<std::size_t>(k));
  return {std::move(idx),
          std::vector<SelectionReason>(static_cast<std::size_t>(k), reason),
          {}};
}

}  // namespace

QueryResult cusal_select(const AcquisitionScores& scores, int k, const TieRule& tie) {
  const int m = static_cast<int>(scores.calibration.size());
  if (scores.confidence.size() != scores.calibration.size())
    throw std::invalid_argument("score set length mismatch");
  check_batch(k, m);

  std::vector<double> rounded(scores.calibration.size());
  for (std::size_t i = 0; i < rounded.size(); ++i)
    rounded[i] = tie.round(scores.calibration[i]);

  std::vector<int> idx = iota_indices(m);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const auto sa = static_cast<std::size_t>(a), sb = static_cast<std::size_t>(b);
    if (rounded[sa] != rounded[sb]) return rounded[sa] > rounded[sb];
    if (scores.confidence[sa] != scores.confidence[sb])
      return scores.confidence[sa] < scores.confidence[sb];
    return a < b;
  });

  QueryResult out;
  out.indices.assign(idx.begin(), idx.begin() + k);
  out.reasons.assign(static_cast<std::size_t>(k),
                     SelectionReason::kDistinctCalibration);
  if (k > 0) {
    // A tie group straddles the boundary when some of its members were left
    // out; membership of its selected samples was then decided by confidence.
    const double boundary = rounded[static_cast<std::size_t>(out.indices.back())];
    std::size_t group_total = 0;
    for (double r : rounded)
      if (r == boundary) ++group_total;
    std::size_t group_selected = 0;
    for (int i : out.indices)
      if (rounded[static_cast<std::size_t>(i)] == boundary) ++group_selected;
    if (group_total > group_selected) {
      for (std::size_t j = 0; j < out.indices.size(); ++j)
        if (rounded[static_cast<std::size_t>(out.indices[j])] == boundary)
          out.reasons[j] = SelectionReason::kTieBrokenByUncertainty;
    }
  }
  return out;
}

QueryResult random_select(int m, int k, RngStream& rng) {
  check_batch(k, m);
  QueryResult out;
  out.indices = rng.sample_without_replacement(m, k);
  out.reasons.assign(static_cast<std::size_t>(k),
                     SelectionReason::kStrategySpecific);
  return out;
}

QueryResult least_confident_select(std::span<const ProbVector> forecasts, int k) {
  const int m = static_cast<int>(forecasts.size());
  check_batch(k, m);
  std::vector<double> conf(forecasts.size());
  for (std::size_t i = 0; i < forecasts.size(); ++i) conf[i] = forecasts[i].max_prob();
  return pick_top(
      m, k,
      [&](int a, int b) {
        const auto sa = static_cast<std::size_t>(a), sb = static_cast<std::size_t>(b);
        if (conf[sa] != conf[sb]) return conf[sa] < conf[sb];
        return a < b;
      },
      SelectionReason::kStrategySpecific);
}

QueryResult margin_select(std::span<const ProbVector> forecasts, int k) {
  const int m = static_cast<int>(forecasts.size());
  check_batch(k, m);
  std::vector<double> gap(forecasts.size());
  for (std::size_t i = 0; i < forecasts.size(); ++i) gap[i] = forecasts[i].margin();
  return pick_top(
      m, k,
      [&](int a, int b) {
        const auto sa = static_cast<std::size_t>(a), sb = static_cast<std::size_t>(b);
        if (gap[sa] != gap[sb]) return gap[sa] < gap[sb];
        return a < b;
      },
      SelectionReason::kStrategySpecific);
}

QueryResult entropy_select(std::span<const ProbVector> forecasts, int k) {
  const int m = static_cast<int>(forecasts.size());
  check_batch(k, m);
  std::vector<double> ent(forecasts.size());
  for (std::size_t i = 0; i < forecasts.size(); ++i) ent[i] = forecasts[i].entropy();
  return pick_top(
      m, k,
      [&](int a, int b) {
        const auto sa = static_cast<std::size_t>(a), sb = static_cast<std::size_t>(b);
        if (ent[sa] != ent[sb]) return ent[sa] > ent[sb];
        return a < b;
      },
      SelectionReason::kStrategySpecific);
}

QueryResult bald_select(const std::vector<std::vector<ProbVector>>& mc_forecasts,
                        int k) {
  const std::size_t n_slices = mc_forecasts.size();
  if (n_slices < 2) throw std::invalid_argument("BALD needs at least 2 MC slices");
  const std::size_t m = mc_forecasts.front().size();
  for (const auto& slice : mc_forecasts)
    if (slice.size() != m) throw std::invalid_argument("ragged MC forecast tensor");
  check_batch(k, static_cast<int>(m));

  std::vector<double> score(m);
  std::vector<double> mean_p;
  for (std::size_t j = 0; j < m; ++j) {
    const int dim = mc_forecasts[0][j].dim();
    mean_p.assign(static_cast<std::size_t>(dim), 0.0);
    double mean_entropy = 0.0;
    for (const auto& slice : mc_forecasts) {
      const ProbVector& p = slice[j];
      for (int c = 0; c < dim; ++c) mean_p[static_cast<std::size_t>(c)] += p[c];
      mean_entropy += p.entropy();
    }
    const double inv_s = 1.0 / static_cast<double>(n_slices);
    double h_mean = 0.0;
    for (double v : mean_p) {
      const double q = v * inv_s;
      if (q > 0.0) h_mean -= q * std::log(q);
    }
    score[j] = h_mean - mean_entropy * inv_s;
  }
  return pick_top(
      static_cast<int>(m), k,
      [&](int a, int b) {
        const auto sa = static_cast<std::size_t>(a), sb = static_cast<std::size_t>(b);
        if (score[sa] != score[sb]) return score[sa] > score[sb];
        return a < b;
      },
      SelectionReason::kStrategySpecific);
}

QueryResult coreset_select(const Matrix& embeddings, const Matrix& labeled_embeddings,
                           int k) {
  const int m = static_cast<int>(embeddings.rows());
  check_batch(k, m);
  if (labeled_embeddings.rows() > 0 &&
      labeled_embeddings.cols() != embeddings.cols())
    throw std::invalid_argument("embedding dimension mismatch");

  QueryResult out;
  out.reasons.assign(static_cast<std::size_t>(k),
                     SelectionReason::kStrategySpecific);
  if (k == 0) return out;

  // squared min-distance from each pool point to the covered set
  std::vector<double> min_d2(static_cast<std::size_t>(m),
                             std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < labeled_embeddings.rows(); ++r) {
    const auto lab = labeled_embeddings.row(r);
    for (int j = 0; j < m; ++j) {
      const double d2 = squared_distance(embeddings.row(static_cast<std::size_t>(j)), lab);
      auto& cur = min_d2[static_cast<std::size_t>(j)];
      cur = std::min(cur, d2);
    }
  }

  auto cover = [&](int picked) {
    const auto center = embeddings.row(static_cast<std::size_t>(picked));
    for (int j = 0; j < m; ++j) {
      const double d2 = squared_distance(embeddings.row(static_cast<std::size_t>(j)), center);
      auto& cur = min_d2[static_cast<std::size_t>(j)];
      cur = std::min(cur, d2);
    }
    min_d2[static_cast<std::size_t>(picked)] = -1.0;  // never re-picked
  };

  int start = 0;
  if (labeled_embeddings.rows() == 0) {
    out.indices.push_back(0);
    cover(0);
    start = 1;
  }
  for (int step = start; step < k; ++step) {
    int best = -1;
    double best_d2 = -1.0;
    for (int j = 0; j < m; ++j) {
      const double d2 = min_d2[static_cast<std::size_t>(j)];
      if (d2 > best_d2) {
        best_d2 = d2;
        best = j;
      }
    }
    out.indices.push_back(best);
    cover(best);
  }
  return out;
}

QueryResult badge_select(const Matrix& grad_embeddings, int k, RngStream& rng) {
  const int m = static_cast<int>(grad_embeddings.rows());
  check_batch(k, m);

  std::vector<double> weight(static_cast<std::size_t>(m), 0.0);
  for (int j = 0; j < m; ++j) {
    const auto row = grad_embeddings.row(static_cast<std::size_t>(j));
    double s = 0.0;
    for (double v : row) s += v * v;
    weight[static_cast<std::size_t>(j)] = s;
  }
  double total = std::accumulate(weight.begin(), weight.end(), 0.0);
  if (total == 0.0) {
    QueryResult out = random_select(m, k, rng);
    out.note = "all-zero gradient embeddings; fell back to random selection";
    return out;
  }

  QueryResult out;
  out.reasons.assign(static_cast<std::size_t>(k),
                     SelectionReason::kStrategySpecific);
  std::vector<bool> chosen(static_cast<std::size_t>(m), false);

  auto weighted_draw = [&]() -> int {
    const double u = rng.uniform01() * total;
    double cum = 0.0;
    int last_positive = -1;
    for (int j = 0; j < m; ++j) {
      const double w = weight[static_cast<std::size_t>(j)];
      if (w <= 0.0) continue;
      cum += w;
      last_positive = j;
      if (u < cum) return j;
    }
    return last_positive;  // guards the cum < total rounding edge
  };

  for (int step = 0; step < k; ++step) {
    int pick;
    if (total > 0.0) {
      pick = weighted_draw();
    } else {
      // remaining candidates all coincide with earlier picks: uniform choice
      std::vector<int> remaining;
      for (int j = 0; j < m; ++j)
        if (!chosen[static_cast<std::size_t>(j)]) remaining.push_back(j);
      pick = remaining[rng.below(remaining.size())];
    }
    out.indices.push_back(pick);
    chosen[static_cast<std::size_t>(pick)] = true;

    // reweight: squared distance to the nearest chosen point
    const auto center = grad_embeddings.row(static_cast<std::size_t>(pick));
    total = 0.0;
    for (int j = 0; j < m; ++j) {
      auto& w = weight[static_cast<std::size_t>(j)];
      if (chosen[static_cast<std::size_t>(j)]) {
        w = 0.0;
        continue;
      }
      const double d2 =
          squared_distance(grad_embeddings.row(static_cast<std::size_t>(j)), center);
      if (step == 0 || d2 < w) w = d2;
      total += w;
    }
  }
  return out;
}

QueryResult two_stage_select(const SubsetStrategy& first, int k_m,
                             const SubsetStrategy& second, int k, int m) {
  if (k > k_m) throw std::invalid_argument("k exceeds shortlist size");
  check_batch(k_m, m);

  const std::vector<int> all = iota_indices(m);
  QueryResult shortlist = first(all, k_m);
  if (static_cast<int>(shortlist.indices.size()) != k_m)
    throw std::logic_error("first stage returned wrong count");

  QueryResult out = second(shortlist.indices, k);
  if (static_cast<int>(out.indices.size()) != k)
    throw std::logic_error("second stage returned wrong count");
  return out;
}

std::vector<std::vector<int>> average_linkage_clusters(const Matrix& embeddings,
                                                       int n_clusters) {
  const int n = static_cast<int>(embeddings.rows());
  if (n_clusters < 1 || n_clusters > n)
    throw std::invalid_argument("bad cluster count");

  // pairwise Euclidean point distances
  std::vector<double> pd(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const double d = std::sqrt(squared_distance(
          embeddings.row(static_cast<std::size_t>(a)),
          embeddings.row(static_cast<std::size_t>(b))));
      pd[static_cast<std::size_t>(a) * n + b] = d;
      pd[static_cast<std::size_t>(b) * n + a] = d;
    }

  std::vector<std::vector<int>> members(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(i)] = {i};
  std::vector<bool> alive(static_cast<std::size_t>(n), true);
  // cluster-to-cluster average distances, updated by Lance-Williams
  std::vector<double> cd = pd;
  auto cdist = [&](int a, int b) -> double& {
    return cd[static_cast<std::size_t>(a) * n + b];
  };

  int active = n;
  while (active > n_clusters) {
    int best_a = -1, best_b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) {
      if (!alive[static_cast<std::size_t>(a)]) continue;
      for (int b = a + 1; b < n; ++b) {
        if (!alive[static_cast<std::size_t>(b)]) continue;
        if (cdist(a, b) < best) {
          best = cdist(a, b);
          best_a = a;
          best_b = b;
        }
      }
    }
    const double na = static_cast<double>(members[static_cast<std::size_t>(best_a)].size());
    const double nb = static_cast<double>(members[static_cast<std::size_t>(best_b)].size());
    for (int c = 0; c < n; ++c) {
      if (!alive[static_cast<std::size_t>(c)] || c == best_a || c == best_b) continue;
      const double merged =
          (na * cdist(best_a, c) + nb * cdist(best_b, c)) / (na + nb);
      cdist(best_a, c) = merged;
      cdist(c, best_a) = merged;
    }
    auto& ma = members[static_cast<std::size_t>(best_a)];
    auto& mb = members[static_cast<std::size_t>(best_b)];
    ma.insert(ma.end(), mb.begin(), mb.end());
    mb.clear();
    alive[static_cast<std::size_t>(best_b)] = false;
    --active;
  }

  std::vector<std::vector<int>> out;
  for (int i = 0; i < n; ++i)
    if (alive[static_cast<std::size_t>(i)]) {
      auto& m = members[static_cast<std::size_t>(i)];
      std::sort(m.begin(), m.end());
      out.push_back(std::move(m));
    }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.front() < b.front();
  });
  return out;
}

QueryResult weighted_combo_select(const AcquisitionScores& scores,
                                  const ComboWeighting& weighting, int k) {
  const int m = static_cast<int>(scores.calibration.size());
  if (scores.confidence.size() != scores.calibration.size())
    throw std::invalid_argument("score set length mismatch");
  check_batch(k, m);

  double cal_weight = 1.0;  // uniform mode: (cal + unc) / 2
  if (weighting.adaptive) {
    double alpha = 0.0;
    if (m > 0) {
      for (double c : scores.calibration) alpha += c;
      alpha /= static_cast<double>(m);
    }
    alpha = std::clamp(alpha, 0.0, 1.0);
    cal_weight = weighting.multiplier * alpha;
  }

  std::vector<double> score(scores.calibration.size());
  for (std::size_t i = 0; i < score.size(); ++i) {
    const double unc = 1.0 - scores.confidence[i];
    score[i] = (cal_weight * scores.calibration[i] + unc) / (cal_weight + 1.0);
  }
  return pick_top(
      m, k,
      [&](int a, int b) {
        const auto sa = static_cast<std::size_t>(a), sb = static_cast<std::size_t>(b);
        if (score[sa] != score[sb]) return score[sa] > score[sb];
        return a < b;
      },
      SelectionReason::kStrategySpecific);
}

QueryResult calibration_only_select(const AcquisitionScores& scores, int k) {
  const int m = static_cast<int>(scores.calibration.size());
  check_batch(k, m);
  return pick_top(
      m, k,
      [&](int a, int b) {
        const auto sa = static_cast<std::size_t>(a), sb = static_cast<std::size_t>(b);
        if (scores.calibration[sa] != scores.calibration[sb])
          return scores.calibration[sa] > scores.calibration[sb];
        return a < b;
      },
      SelectionReason::kStrategySpecific);
}

}  // namespace cusal
