#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cusal/matrix.hpp"
#include "cusal/prob.hpp"
#include "cusal/rng.hpp"

namespace cusal {

/// An immutable labeled sample collection. Features are row vectors scaled to
/// the unit interval for image data; synthetic features are unclipped reals.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  int n_classes = 0;
  std::string name;

  std::size_t size() const { return features.rows(); }
};

/// Load a dataset from a pair of IDX files (the MNIST container format).
/// Images: big-endian magic 0x00000803, counts N, R, C, then N*R*C bytes,
/// scaled by 1/255. Labels: magic 0x00000801, count N, then N bytes.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Inverse of load_idx for byte-representable features: writes round(f * 255)
/// pixels with the given image geometry (rows * cols must equal feature width).
void save_idx(const Dataset& dataset, int image_rows, int image_cols,
              const std::string& images_path, const std::string& labels_path);

struct GaussianMixtureConfig {
  int n_classes = 3;
  int dim = 2;
  int n_samples = 1000;
  std::vector<std::vector<double>> means;  // one center per class
  std::vector<double> scales;              // isotropic sigma per class
  double label_noise = 0.0;                // eta in [0, 0.5)

  friend bool operator==(const GaussianMixtureConfig&,
                         const GaussianMixtureConfig&) = default;
};

/// Spherical Gaussian mixture with uniform class prior and symmetric label
/// noise. The class posterior P(Y = c | x) is available in closed form, which
/// makes this the ground-truth bed for calibration-estimator checks: a
/// forecaster that outputs `posterior(x)` is distribution calibrated by
/// construction.
class GaussianMixture {
 public:
  GaussianMixture(GaussianMixtureConfig cfg, RngStream& rng);

  const Dataset& dataset() const { return dataset_; }
  const GaussianMixtureConfig& config() const { return cfg_; }

  /// Closed-form P(Y | X = x) including the label-noise mixing.
  ProbVector posterior(std::span<const double> x) const;

 private:
  GaussianMixtureConfig cfg_;
  Dataset dataset_;
};

/// Exponentially decaying class profile: class c keeps
/// floor(n_max * (1 / imbalance_factor)^(c / (K-1))) samples, at least one,
/// where n_max is the largest available class count. Subsampling is uniform
/// without replacement; surviving samples keep their original order.
Dataset make_longtail(const Dataset& dataset, double imbalance_factor,
                      RngStream& rng);

/// Disjoint warm-up / pool / test index partition.
struct SplitPlan {
  std::vector<int> warmup;
  std::vector<int> pool;
  std::vector<int> test;
  int warmup_size = 0;
  bool warmup_balanced = false;
  std::uint64_t seed = 0;
};

/// Random partition with floor(N * test_fraction) test samples. A balanced
/// warm-up takes floor(n0 / K) samples per class plus one extra for n0 mod K
/// randomly chosen classes.
SplitPlan plan_split(const Dataset& dataset, int warmup_size, double test_fraction,
                     bool balanced, RngStream& rng);

}  // namespace cusal
