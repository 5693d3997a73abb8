#include "pausebench/finetune.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "pausebench/error.hpp"
#include "pausebench/prompts.hpp"
#include "pausebench/runner.hpp"

namespace pausebench {

namespace {

constexpr std::string_view kInstructionHeader = "###Instruction:\n\n";
constexpr std::string_view kContextHeader = "\n\n###Context:";
constexpr int kMaxRedraws = 16;

std::string pause_aware_instruction() {
  const std::string_view tmpl = prompt_template(TemplateKind::pause_aware);
  const std::size_t start = tmpl.find(kInstructionHeader) + kInstructionHeader.size();
  return std::string(tmpl.substr(start, tmpl.find(kContextHeader) - start));
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

void to_json(nlohmann::json& j, const TrainingRecord& r) {
  j = nlohmann::json::object();
  j["instruction"] = r.instruction;
  j["context"] = r.context;
  j["query"] = r.query;
  j["response"] = r.response;
  j["meta"] = {{"target_tokens", r.meta.target_tokens},
               {"needle_depth_pct", r.meta.needle_depth_pct},
               {"seed", r.meta.seed},
               {"haystack_tokens", r.meta.haystack_tokens}};
}

void from_json(const nlohmann::json& j, TrainingRecord& r) {
  r.instruction = j.at("instruction").get<std::string>();
  r.context = j.at("context").get<std::string>();
  r.query = j.at("query").get<std::string>();
  r.response = j.at("response").get<std::string>();
  const auto& m = j.at("meta");
  r.meta.target_tokens = m.at("target_tokens").get<std::size_t>();
  r.meta.needle_depth_pct = m.at("needle_depth_pct").get<double>();
  r.meta.seed = m.at("seed").get<std::uint64_t>();
  r.meta.haystack_tokens = m.value("haystack_tokens", std::size_t{0});
}

TrainingRecord gen_example(const Corpus& corpus, std::size_t target_tokens, const NeedleSpec& needle,
                           const Tokenizer& tokenizer, std::uint64_t seed) {
  const Haystack haystack =
      build_haystack(corpus, target_tokens, tokenizer, derive_seed(seed, "haystack"), DocumentOrder::shuffled);
  Rng rng(derive_seed(seed, "depth"));
  const double depth = rng.uniform(5.0, 95.0);
  const PlacedContext placed = place_needle(haystack, needle, depth, tokenizer);

  TrainingRecord r;
  r.instruction = pause_aware_instruction();
  r.context = inject_pauses(placed.text, InjectionMode::standard).text;
  r.query = needle.question;
  r.response = needle.needle;
  r.meta.target_tokens = target_tokens;
  r.meta.needle_depth_pct = placed.achieved_depths_pct.front();
  r.meta.seed = seed;
  r.meta.haystack_tokens = haystack.token_count;
  return r;
}

std::string render_training_prompt(const TrainingRecord& record) {
  return fill_template(prompt_template(TemplateKind::pause_aware), record.context, record.query);
}

FinetuneConfig parse_finetune_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  FinetuneConfig c;
  try {
    if (j.contains("sizes")) {
      c.sizes = j.at("sizes").get<std::vector<std::size_t>>();
    } else {
      c.sizes.assign(std::begin(kContextLadder), std::end(kContextLadder));
    }
    c.count_per_size = j.value("count_per_size", std::size_t{1});
    c.seed = j.value("seed", std::uint64_t{0});
    c.corpus_dir = resolve(base_dir, j.at("corpus").get<std::string>());
    c.corpus_glob = j.value("corpus_glob", "*.txt");
    c.vocab_path = resolve(base_dir, j.at("vocab").get<std::string>());
    const auto& needles = j.at("needles");
    if (needles.is_string()) {
      c.needles = load_needles(resolve(base_dir, needles.get<std::string>()));
    } else {
      for (const auto& n : needles) {
        c.needles.push_back({n.at("needle").get<std::string>(), n.at("question").get<std::string>(),
                             n.at("reference_answer").get<std::string>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fine-tune config: ") + e.what());
  }
  for (std::size_t size : c.sizes) {
    if (std::find(std::begin(kContextLadder), std::end(kContextLadder), size) == std::end(kContextLadder)) {
      throw ParseError("size " + std::to_string(size) + " is not on the 1K..128K ladder");
    }
  }
  if (c.needles.empty()) throw ParseError("fine-tune config has an empty needle pool");
  return c;
}

FinetuneConfig load_finetune_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_finetune_config(j, path.parent_path());
}

std::vector<TrainingRecord> gen_records(const FinetuneConfig& config, const Corpus& corpus,
                                        const Tokenizer& tokenizer) {
  if (config.needles.empty()) throw InvalidArgument("needle pool is empty");
  std::vector<NeedleSpec> pool = config.needles;
  Rng shuffle_rng(derive_seed(config.seed, "needle-pool"));
  shuffle_rng.shuffle(pool);

  std::vector<TrainingRecord> records;
  std::set<std::string> seen;  // (haystack bytes, needle) fingerprints
  std::size_t next_needle = 0;
  for (std::size_t size : config.sizes) {
    for (std::size_t i = 0; i < config.count_per_size; ++i) {
      const NeedleSpec& needle = pool[next_needle++ % pool.size()];
      const std::string label = "record|" + std::to_string(size) + "|" + std::to_string(i);
      bool placed = false;
      for (int attempt = 0; attempt < kMaxRedraws && !placed; ++attempt) {
        const std::uint64_t seed =
            derive_seed(config.seed, attempt == 0 ? label : label + "|redraw" + std::to_string(attempt));
        TrainingRecord r = gen_example(corpus, size, needle, tokenizer, seed);
        std::string haystack = r.context;
        haystack.erase(haystack.find(r.response), r.response.size());
        if (!seen.insert(sha256_hex(haystack) + "|" + sha256_hex(r.response)).second) continue;
        records.push_back(std::move(r));
        placed = true;
      }
      if (!placed) {
        throw InvalidArgument("could not draw a distinct haystack for size " + std::to_string(size) +
                              "; the corpus is too small for count_per_size=" +
                              std::to_string(config.count_per_size));
      }
    }
  }
  return records;
}

nlohmann::ordered_json training_config() {
  nlohmann::ordered_json lora = {
      {"rank", 16},
      {"alpha", 16},
      {"dropout", 0},
      {"target_modules", {"q_proj", "k_proj", "v_proj", "o_proj", "gate_proj", "up_proj", "down_proj"}},
  };
  nlohmann::ordered_json training = {
      {"batch_size", 2},
      {"gradient_accumulation_steps", 4},
      {"learning_rate", 2e-4},
      {"weight_decay", 0.01},
      {"warmup_steps", 6},
      {"steps", 60},
      {"lr_scheduler", "linear"},
      {"optimizer", "adamw_8bit"},
  };
  nlohmann::ordered_json other = {
      {"mixed_precision", "fp16"},
      {"quantization_bits", 4},
  };
  return {{"lora", lora}, {"training", training}, {"other", other}};
}

DatasetFiles gen_dataset(const FinetuneConfig& config, const Corpus& corpus, const Tokenizer& tokenizer,
                         const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const std::vector<TrainingRecord> records = gen_records(config, corpus, tokenizer);

  DatasetFiles files;
  files.dataset = out_dir / "dataset.jsonl";
  files.training_config = out_dir / "training_config.json";
  files.records = records.size();

  std::string lines;
  for (const TrainingRecord& r : records) {
    nlohmann::json j = r;
    lines += j.dump() + "\n";
  }
  write_file(files.dataset, lines);

  write_file(files.training_config, training_config().dump(2) + "\n");
  return files;
}

}  // namespace pausebench
