#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace pausebench {

// Head-averaged attention from the first generated token over every prompt
// position, one vector per layer.
struct AttentionDump {
  std::string model_name;
  std::size_t prompt_token_count = 0;
  std::vector<std::vector<double>> layers;
  std::vector<std::size_t> pause_positions;
  std::pair<std::size_t, std::size_t> needle_span{0, 0};  // [start, end)
  std::string technique;
};

// Structural checks mirroring schemas/attention_dump.schema.json.
AttentionDump parse_attention_dump(const nlohmann::json& j);
AttentionDump load_attention_dump(const std::filesystem::path& path);
nlohmann::json to_json(const AttentionDump& dump);

// Each layer divided by its own maximum; an all-zero layer stays zero.
// Throws InvalidArgument on NaN or negative weights.
std::vector<std::vector<double>> normalize(const AttentionDump& dump);

inline constexpr double kInfiniteRatio = std::numeric_limits<double>::infinity();

struct LayerSpikes {
  std::size_t layer = 0;
  std::vector<double> pause_spike_ratios;  // one per pause position
  double needle_region_mass = 0.0;
  double tail_half_mass = 0.0;
};

struct SpikeReport {
  std::string technique;
  std::vector<LayerSpikes> per_layer;
};

inline constexpr int kDefaultSpikeWindow = 21;

// Ratio of the weight at each pause to the median of the window around it
// (the pause itself excluded). `window` is the full odd width, >= 3.
SpikeReport spike_report(const AttentionDump& dump, int window = kDefaultSpikeWindow);

struct ComparisonRow {
  std::string technique;
  std::size_t layer = 0;
  double needle_region_mass = 0.0;
  double tail_half_mass = 0.0;
  double mean_pause_spike_ratio = 0.0;  // NaN when the dump has no pauses
  double delta_needle_mass = 0.0;       // against the first dump
  double delta_tail_mass = 0.0;
  double profile_l1 = 0.0;              // binned normalized profile vs first dump
};

struct Comparison {
  std::vector<ComparisonRow> rows;  // technique-major, then layer
  std::vector<std::string> techniques;
  std::size_t layer_count = 0;
  std::size_t bins = 0;
  // profiles[d][layer][bin]: mean normalized weight per fractional-position bin.
  std::vector<std::vector<std::vector<double>>> profiles;
};

inline constexpr std::size_t kProfileBins = 100;

// Aligns dumps by fractional position so prompts of different token length
// can be compared. Throws InvalidArgument for fewer than two dumps or a
// layer-count mismatch.
Comparison compare(const std::vector<AttentionDump>& dumps, int window = kDefaultSpikeWindow,
                   std::size_t bins = kProfileBins);

std::string spikes_csv(const std::vector<SpikeReport>& reports);
std::string comparison_csv(const Comparison& comparison);
std::string render_comparison_svg(const Comparison& comparison,
                                  const std::vector<AttentionDump>& dumps);

}  // namespace pausebench
