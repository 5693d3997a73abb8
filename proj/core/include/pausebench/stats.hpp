#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pausebench/runner.hpp"

namespace pausebench {

struct Summary {
  std::string model;
  std::string technique;
  RunMode mode = RunMode::single;
  std::size_t context_tokens = 0;
  double mean = 0.0;
  double std = 0.0;
  int n_trials = 0;
  int n_scores = 0;
};

enum class StdMode {
  per_trial_mean,  // average each trial over depths, then sample std across trials
  pooled,          // mean and sample std over every scored row
};

// Groups scored rows by (model, technique, mode, context_tokens). Failed
// rows are ignored; groups left without scores are dropped with a warning.
// Output is sorted by the group key.
std::vector<Summary> summarize(const std::vector<TrialResult>& results,
                               StdMode mode = StdMode::per_trial_mean);

struct PercentChangeRow {
  std::string model;
  std::string technique;
  RunMode mode = RunMode::single;
  std::map<std::size_t, double> per_length;
  double averaged = 0.0;
};

// 100 * (tech - base) / base at every length both series cover, then the
// plain mean of those values. Rows of `baseline` and `tech` are expected to
// belong to one model and mode.
PercentChangeRow percent_change(const std::vector<Summary>& baseline,
                                const std::vector<Summary>& tech);

// Every non-baseline (model, mode, technique) against its own baseline.
std::vector<PercentChangeRow> percent_change_table(const std::vector<Summary>& summaries);

struct HeatmapCell {
  std::size_t context_tokens = 0;
  double depth_pct = 0.0;
  std::optional<double> mean;
};

struct HeatmapMatrix {
  std::vector<std::size_t> lengths;
  std::vector<double> depths;
  std::vector<HeatmapCell> cells;  // lengths-major, then depths

  const HeatmapCell& at(std::size_t length_index, std::size_t depth_index) const {
    return cells[length_index * depths.size() + depth_index];
  }
};

// Single-needle rows of one (model, technique), averaged over trials.
HeatmapMatrix heatmap_data(const std::vector<TrialResult>& results, std::string_view model,
                           std::string_view technique);

std::string summary_csv(const std::vector<Summary>& summaries);
std::vector<Summary> parse_summary_csv(std::string_view csv);
std::string percent_change_csv(const std::vector<PercentChangeRow>& rows);
std::string heatmap_csv(const HeatmapMatrix& matrix);

// Hex color for a score on the 1 (red) .. 10 (green) scale.
std::string score_color(double score);

// One <rect class="cell"> per cell; depths on the y axis, lengths on x.
std::string render_heatmap(const HeatmapMatrix& matrix);

}  // namespace pausebench
