#include "cusal/prob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cusal {

int ProbVector::argmax() const {
  int best = 0;
  for (int i = 1; i < dim(); ++i)
    if (p[static_cast<std::size_t>(i)] > p[static_cast<std::size_t>(best)]) best = i;
  return best;
}

double ProbVector::max_prob() const { return p[static_cast<std::size_t>(argmax())]; }

double ProbVector::margin() const {
  if (dim() < 2) throw std::invalid_argument("margin needs K >= 2");
  double top1 = -1.0, top2 = -1.0;
  for (double v : p) {
    if (v > top1) {
      top2 = top1;
      top1 = v;
    } else if (v > top2) {
      top2 = v;
    }
  }
  return top1 - top2;
}

double ProbVector::entropy() const {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

ProbVector ProbVector::from_raw(std::vector<double> raw) {
  if (raw.empty()) throw std::invalid_argument("empty probability vector");
  double sum = 0.0;
  for (double& v : raw) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("bad probability entry");
    v = std::max(v, kSimplexFloor);
    sum += v;
  }
  for (double& v : raw) v /= sum;
  // renormalization can push a floored entry marginally below the floor;
  // raise it back (the residual sum error is O(K^2 * floor^2))
  for (double& v : raw) v = std::max(v, kSimplexFloor);
  return ProbVector{std::move(raw)};
}

ProbVector softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("empty logit vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(m)) throw std::invalid_argument("non-finite logit");
  std::vector<double> e(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    e[i] = std::exp(logits[i] - m);
    sum += e[i];
  }
  for (double& v : e) v /= sum;
  return ProbVector::from_raw(std::move(e));
}

}  // namespace cusal
