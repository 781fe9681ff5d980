#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cusal/acquisition.hpp"
#include "cusal/calibration.hpp"
#include "cusal/dataset.hpp"
#include "cusal/mlp.hpp"

namespace cusal {

/// Full description of one experiment: data source, loop geometry, model and
/// estimator hyperparameters, strategies, and seeds. Parsed from a flat
/// key = value text file; see docs/config.md for the grammar and key list.
struct ExperimentConfig {
  std::string name = "experiment";

  // data source
  std::string dataset = "gaussian_mixture";  // or "idx"
  std::string idx_images;
  std::string idx_labels;
  GaussianMixtureConfig synth;
  double imbalance_factor = 1.0;
  int subset = 0;  // cap on dataset size after loading, 0 = keep all
  double test_fraction = 0.2;

  // active-learning loop
  int warmup_size = 30;  // n0
  bool warmup_balanced = true;
  int rounds = 20;  // T
  int batch = 10;   // queries per round, k
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;

  // model
  std::vector<int> hidden = {128};
  double dropout = 0.5;
  TrainConfig train;
  int mc_samples = 10;

  // estimator and selection
  CalibrationConfig calibration;
  EceConfig ece;
  TieRule tie;
  int shortlist_factor = 10;     // k_m = shortlist_factor * batch
  double combo_multiplier = 1.0; // kappa for the adaptive combination

  // output
  std::string timing = "none";  // "none" writes 0 wallclock, "wall" measures
  std::string out_dir = "results";
  bool emit_svg = true;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parse and validate a config document. Unknown keys, malformed values, and
/// out-of-range settings raise std::runtime_error with the offending line
/// number where one exists.
ExperimentConfig parse_config(const std::string& text);

/// Canonical text form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// All strategy identifiers the harness can run.
const std::vector<std::string>& strategy_names();
bool strategy_registered(const std::string& name);

}  // namespace cusal
