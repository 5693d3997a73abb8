#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pausebench/client.hpp"
#include "pausebench/corpus.hpp"
#include "pausebench/haystack.hpp"
#include "pausebench/prompts.hpp"
#include "pausebench/token.hpp"

namespace pausebench {

enum class RunMode { single, multi };
std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);

inline constexpr std::size_t kContextLadder[] = {1000,  2000,  4000,  8000,
                                                 16000, 32000, 64000, 128000};

struct RunSpec {
  std::string model;
  TechniqueId technique = TechniqueId::baseline;
  std::size_t context_tokens = 0;
  RunMode mode = RunMode::single;
  int depth_index = -1;    // single mode only
  double depth_pct = 0.0;  // single mode only
  int trial = 0;

  // Unique key for the results file.
  std::string key() const;
  // Identifies the haystack and needle placement. Excludes model and
  // technique so every arm of a cell sees identical context bytes.
  std::string placement_key() const;
};

struct TrialResult {
  std::string key;
  std::string model;
  std::string technique;
  RunMode mode = RunMode::single;
  std::size_t context_tokens = 0;
  std::optional<double> depth_pct;
  int trial = 0;
  std::optional<int> score;
  std::string answer;
  std::string judge_raw;
  std::vector<double> achieved_depths;
  long pause_overhead_tokens = 0;
  std::optional<std::string> error;
  std::string started_at;
  std::string finished_at;
};

void to_json(nlohmann::ordered_json& j, const TrialResult& r);
void from_json(const nlohmann::json& j, TrialResult& r);

struct ModelEntry {
  ModelProfile profile;
  // Endpoints standing in for this model under techniques that need a
  // fine-tuned checkpoint (t4, t5).
  std::map<TechniqueId, ModelProfile> finetuned;
};

struct RunConfig {
  std::vector<ModelEntry> models;
  std::optional<ModelProfile> judge;
  std::vector<TechniqueId> techniques;
  std::vector<std::size_t> lengths;
  RunMode mode = RunMode::single;
  int depth_count = 15;
  int single_trials = 3;
  int multi_trials = 15;
  std::uint64_t seed = 42;
  std::size_t concurrency = 4;
  bool shuffle_documents = true;

  std::filesystem::path corpus_dir;
  std::string corpus_glob = "*.txt";
  std::filesystem::path vocab_path;
  std::filesystem::path needles_path;
};

// Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Full grid filtered by each model's context capacity, ordered by
// (model, technique, length, depth, trial). Throws InvalidArgument when a
// technique needs a fine-tuned endpoint the model entry does not name.
std::vector<RunSpec> plan_runs(const RunConfig& config);

// Everything sent to the target model for one spec.
struct PreparedTrial {
  RenderedPrompt prompt;
  PlacedContext placed;
  std::string question;
  std::string reference;
  long pause_overhead_tokens = 0;
};

struct RunReport {
  std::size_t planned = 0;
  std::size_t skipped = 0;   // already in the results file
  std::size_t executed = 0;
  std::size_t failed = 0;
};

struct ExecuteOptions {
  bool resume = true;
  // Stop scheduling new trials after this many have been started (0 = no limit).
  std::size_t max_new_trials = 0;
};

// One question covering every needle, and the needles joined as the reference.
std::string multi_needle_question(const std::vector<NeedleSpec>& needles);
std::string multi_needle_reference(const std::vector<NeedleSpec>& needles);

// Reads a results file; tolerates a truncated final line.
std::vector<TrialResult> load_results(const std::filesystem::path& path);

class Runner {
 public:
  Runner(RunConfig config, Corpus corpus, const Tokenizer& tokenizer,
         std::vector<NeedleSpec> needles, const ChatClient& client);

  PreparedTrial prepare(const RunSpec& spec) const;

  RunReport execute(const std::vector<RunSpec>& plan, const std::filesystem::path& results_path,
                    const ExecuteOptions& options = {});

  const RunConfig& config() const { return config_; }
  std::size_t peak_in_flight() const { return limiter_.peak(); }

 private:
  RunConfig config_;
  Corpus corpus_;
  const Tokenizer& tokenizer_;
  std::vector<NeedleSpec> needles_;
  const ChatClient& client_;
  mutable InflightLimiter limiter_;

  mutable std::mutex cache_mu_;
  mutable std::map<std::string, Haystack> haystacks_;

  const Haystack& haystack_for(const RunSpec& spec) const;
  const ModelProfile& target_for(const RunSpec& spec) const;
  TrialResult run_trial(const RunSpec& spec) const;
};

}  // namespace pausebench
