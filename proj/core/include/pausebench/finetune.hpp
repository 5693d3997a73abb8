#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pausebench/corpus.hpp"
#include "pausebench/haystack.hpp"
#include "pausebench/token.hpp"

namespace pausebench {

struct TrainingMeta {
  std::size_t target_tokens = 0;
  double needle_depth_pct = 0.0;
  std::uint64_t seed = 0;
  std::size_t haystack_tokens = 0;
};

// One-shot example: instruction, pause-injected context holding the needle,
// a query that needs the needle, and the needle itself as the response.
struct TrainingRecord {
  std::string instruction;
  std::string context;
  std::string query;
  std::string response;
  TrainingMeta meta;
};

void to_json(nlohmann::json& j, const TrainingRecord& r);
void from_json(const nlohmann::json& j, TrainingRecord& r);

TrainingRecord gen_example(const Corpus& corpus, std::size_t target_tokens, const NeedleSpec& needle,
                           const Tokenizer& tokenizer, std::uint64_t seed);

// Pause-aware prompt with the record's context and query substituted.
std::string render_training_prompt(const TrainingRecord& record);

struct FinetuneConfig {
  std::vector<std::size_t> sizes;
  std::size_t count_per_size = 1;
  std::vector<NeedleSpec> needles;
  std::uint64_t seed = 0;
  std::filesystem::path corpus_dir;
  std::string corpus_glob = "*.txt";
  std::filesystem::path vocab_path;
};

FinetuneConfig parse_finetune_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
FinetuneConfig load_finetune_config(const std::filesystem::path& path);

// Records in (size, index) order; needles drawn round-robin from a seeded
// shuffle of the pool.
std::vector<TrainingRecord> gen_records(const FinetuneConfig& config, const Corpus& corpus,
                                        const Tokenizer& tokenizer);

// LoRA / trainer hyperparameters handed to external trainers unchanged.
nlohmann::ordered_json training_config();

struct DatasetFiles {
  std::filesystem::path dataset;
  std::filesystem::path training_config;
  std::size_t records = 0;
};

// Writes dataset.jsonl and training_config.json into `out_dir`.
DatasetFiles gen_dataset(const FinetuneConfig& config, const Corpus& corpus,
                         const Tokenizer& tokenizer, const std::filesystem::path& out_dir);

}  // namespace pausebench
