#pragma once

#include <span>
#include <vector>

namespace cusal {

/// Forecasts live strictly inside the probability simplex: every coordinate
/// is clamped to at least this floor before renormalization, so kernel terms
/// that raise coordinates to large powers stay finite in log space.
inline constexpr double kSimplexFloor = 1e-12;

/// A point on the (K-1)-simplex: the classifier's predicted class
/// distribution for one sample.
struct ProbVector {
  std::vector<double> p;

  int dim() const { return static_cast<int>(p.size()); }
  double operator[](int i) const { return p[static_cast<std::size_t>(i)]; }

  int argmax() const;
  double max_prob() const;
  /// Gap between the two largest coordinates.
  double margin() const;
  /// Shannon entropy, natural log.
  double entropy() const;

  /// Clamp to the simplex floor and renormalize. Used by every constructor
  /// path so downstream code can rely on strictly interior coordinates.
  static ProbVector from_raw(std::vector<double> raw);
};

/// Numerically stable softmax: exp(l_i - max) / sum. Empty input throws.
ProbVector softmax(std::span<const double> logits);

}  // namespace cusal
