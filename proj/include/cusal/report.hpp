#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "cusal/experiment_config.hpp"
#include "cusal/harness.hpp"

namespace cusal {

/// Result CSV: fixed 12-column layout, LF line endings, 9 significant digits.
std::string csv_header();
std::string format_csv(const std::string& strategy, std::uint64_t seed,
                       std::span<const RoundRecord> records, bool with_header);

/// Aggregated per-round means/stds and pairwise Welch p-values as JSON. Key
/// order is fixed, so equal inputs serialize byte-identically.
std::string format_summary_json(const ExperimentConfig& cfg,
                                const RunSummary& summary);

/// Learning-curve plot: one polyline per strategy over rounds, with a shaded
/// band of one standard deviation when several seeds ran. `metric` is one of
/// test_acc, test_ece, pool_ece.
std::string format_curve_svg(const RunSummary& summary, const std::string& metric);

/// Write `content` to `path` byte-for-byte; throws on failure.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace cusal
