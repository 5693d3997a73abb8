#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include "pausebench/attnviz.hpp"
#include "pausebench/error.hpp"
#include "pausebench/finetune.hpp"
#include "pausebench/haystack.hpp"
#include "pausebench/prompts.hpp"
#include "pausebench/runner.hpp"
#include "pausebench/stats.hpp"
#include "pausebench/util.hpp"

namespace fs = std::filesystem;
using namespace pausebench;

namespace {

// Exit codes: 1 bad input, 2 I/O, 3 run finished with failed trials.
constexpr int kExitInput = 1;
constexpr int kExitIo = 2;
constexpr int kExitTrialsFailed = 3;

std::string safe_name(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return s;
}

int corpus_stats(const std::string& dir, const std::string& glob, const std::string& vocab_path) {
  const Corpus corpus = load_corpus(dir, glob);
  const Tokenizer tok = load_vocab(vocab_path);
  std::size_t total_tokens = 0, total_paragraphs = 0, total_sentences = 0, max_para = 0;
  std::printf("document,bytes,paragraphs,sentences,tokens\n");
  for (const Document& d : corpus.documents) {
    const auto paras = split_paragraphs(d.text, d.doc_id);
    std::size_t sentences = 0;
    for (const Paragraph& p : paras) {
      sentences += split_sentences(p.text).size();
      max_para = std::max(max_para, tok.count_tokens(p.text));
    }
    const std::size_t tokens = tok.count_tokens(d.text);
    std::printf("%s,%zu,%zu,%zu,%zu\n", d.doc_id.c_str(), d.text.size(), paras.size(), sentences, tokens);
    total_tokens += tokens;
    total_paragraphs += paras.size();
    total_sentences += sentences;
  }
  std::printf("total,,%zu,%zu,%zu\n", total_paragraphs, total_sentences, total_tokens);
  spdlog::info("{} documents, longest paragraph {} tokens", corpus.documents.size(), max_para);
  return 0;
}

struct BuildArgs {
  std::size_t tokens = 0;
  double depth = 50.0;
  std::string needles;
  std::uint64_t seed = 42;
  std::string corpus;
  std::string glob = "*.txt";
  std::string vocab;
  bool multi = false;
  bool shuffle = false;
  std::string technique = "baseline";
  std::string out;
};

int build(const BuildArgs& a) {
  const Corpus corpus = load_corpus(a.corpus, a.glob);
  const Tokenizer tok = load_vocab(a.vocab);
  const auto needles = load_needles(a.needles);
  if (needles.empty()) throw InvalidArgument("needle file is empty");
  const auto tech = parse_technique(a.technique);
  if (!tech) throw InvalidArgument("unknown technique '" + a.technique + "'");

  const Haystack h = build_haystack(corpus, a.tokens, tok, a.seed,
                                    a.shuffle ? DocumentOrder::shuffled : DocumentOrder::corpus);
  PlacedContext placed;
  std::string question;
  if (a.multi) {
    if (needles.size() < 3) throw InvalidArgument("--multi needs at least 3 needles");
    std::vector<NeedleSpec> trio(needles.begin(), needles.begin() + 3);
    Rng rng(derive_seed(a.seed, "needles"));
    placed = place_needles(h, trio, rng, tok);
    question = multi_needle_question(trio);
  } else {
    placed = place_needle(h, needles[0], a.depth, tok);
    question = needles[0].question;
  }
  const InjectedContext injected = inject_pauses(placed.text, technique(*tech).injection);
  const RenderedPrompt prompt = render_prompt(technique(*tech), injected.text, question, injected.pause_offsets);

  nlohmann::ordered_json meta;
  meta["haystack_tokens"] = h.token_count;
  meta["paragraphs"] = h.paragraphs.size();
  meta["target_depths_pct"] = placed.target_depths_pct;
  meta["achieved_depths_pct"] = placed.achieved_depths_pct;
  nlohmann::ordered_json spans = nlohmann::ordered_json::array();
  for (const Span& s : placed.needle_spans) spans.push_back({s.offset, s.length});
  meta["needle_spans"] = spans;
  meta["pause_positions"] = prompt.pause_positions;

  if (a.out.empty()) {
    std::cout << prompt.messages.back().content << "\n";
    std::cerr << meta.dump(2) << "\n";
  } else {
    fs::create_directories(a.out);
    write_file(fs::path(a.out) / "context.txt", placed.text);
    write_file(fs::path(a.out) / "prompt.txt", prompt.messages.back().content);
    write_file(fs::path(a.out) / "meta.json", meta.dump(2) + "\n");
    spdlog::info("wrote {}", a.out);
  }
  return 0;
}

int run(const std::string& config_path, const std::string& out, bool resume) {
  const RunConfig config = load_run_config(config_path);
  const Corpus corpus = load_corpus(config.corpus_dir, config.corpus_glob);
  const Tokenizer tok = load_vocab(config.vocab_path);
  const auto needles = load_needles(config.needles_path);
  const ChatClient client({}, &tok);
  Runner runner(config, corpus, tok, needles, client);
  const auto plan = plan_runs(config);
  spdlog::info("{} trials planned", plan.size());
  ExecuteOptions options;
  options.resume = resume;
  const RunReport report = runner.execute(plan, out, options);
  spdlog::info("planned {}, skipped {}, executed {}, failed {}", report.planned, report.skipped, report.executed,
               report.failed);
  return report.failed > 0 ? kExitTrialsFailed : 0;
}

int aggregate(const std::string& results_path, const std::string& tables, const std::string& std_mode) {
  if (std_mode != "per_trial_mean" && std_mode != "pooled") {
    throw InvalidArgument("--std must be per_trial_mean or pooled");
  }
  const auto results = load_results(results_path);
  const auto summaries = summarize(results, std_mode == "pooled" ? StdMode::pooled : StdMode::per_trial_mean);
  fs::create_directories(tables);
  write_file(fs::path(tables) / "summary.csv", summary_csv(summaries));
  write_file(fs::path(tables) / "percent_change.csv", percent_change_csv(percent_change_table(summaries)));

  std::set<std::pair<std::string, std::string>> arms;
  for (const TrialResult& r : results) {
    if (r.mode == RunMode::single) arms.insert({r.model, r.technique});
  }
  for (const auto& [model, tech] : arms) {
    const HeatmapMatrix m = heatmap_data(results, model, tech);
    if (m.cells.empty()) continue;
    const std::string stem = "heatmap_" + safe_name(model) + "_" + safe_name(tech);
    write_file(fs::path(tables) / (stem + ".csv"), heatmap_csv(m));
    write_file(fs::path(tables) / (stem + ".svg"), render_heatmap(m));
  }
  spdlog::info("{} rows -> {} summaries, {} heatmaps in {}", results.size(), summaries.size(), arms.size(), tables);
  return 0;
}

int gen_finetune(const std::string& config_path, const std::string& out) {
  const FinetuneConfig config = load_finetune_config(config_path);
  const Corpus corpus = load_corpus(config.corpus_dir, config.corpus_glob);
  const Tokenizer tok = load_vocab(config.vocab_path);
  const DatasetFiles files = gen_dataset(config, corpus, tok, out);
  spdlog::info("{} records -> {}", files.records, files.dataset.string());
  return 0;
}

int attn_report(const std::vector<std::string>& paths, const std::string& out, int window) {
  std::vector<AttentionDump> dumps;
  for (const std::string& p : paths) dumps.push_back(load_attention_dump(p));
  std::vector<SpikeReport> reports;
  for (const AttentionDump& d : dumps) {
    if (d.pause_positions.empty()) {
      spdlog::info("{}: no pause positions, listed in compare.csv only", d.technique);
      continue;
    }
    reports.push_back(spike_report(d, window));
  }
  fs::create_directories(out);
  write_file(fs::path(out) / "spikes.csv", spikes_csv(reports));
  if (dumps.size() >= 2) {
    const Comparison c = compare(dumps, window);
    write_file(fs::path(out) / "compare.csv", comparison_csv(c));
    write_file(fs::path(out) / "compare.svg", render_comparison_svg(c, dumps));
  } else {
    spdlog::warn("one dump given; skipping compare.csv and compare.svg");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pausebench: needle-in-a-haystack runs with pause-token injection"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  auto* corpus_cmd = app.add_subcommand("corpus", "corpus utilities");
  corpus_cmd->require_subcommand(1);
  auto* stats_cmd = corpus_cmd->add_subcommand("stats", "per-document paragraph, sentence and token counts");
  std::string stats_dir, stats_glob = "*.txt", stats_vocab;
  stats_cmd->add_option("dir", stats_dir, "corpus directory")->required();
  stats_cmd->add_option("--glob", stats_glob, "file pattern");
  stats_cmd->add_option("--vocab", stats_vocab, "tiktoken-style rank file")->required();

  BuildArgs b;
  auto* build_cmd = app.add_subcommand("build", "build one haystack with needles and print the prompt");
  build_cmd->add_option("--tokens", b.tokens, "target haystack tokens")->required();
  build_cmd->add_option("--depth", b.depth, "needle depth in percent (single needle)");
  build_cmd->add_option("--needles", b.needles, "needle JSON file")->required();
  build_cmd->add_option("--seed", b.seed, "seed");
  build_cmd->add_option("--corpus", b.corpus, "corpus directory")->required();
  build_cmd->add_option("--glob", b.glob, "file pattern");
  build_cmd->add_option("--vocab", b.vocab, "rank file")->required();
  build_cmd->add_option("--technique", b.technique, "technique id for injection and template");
  build_cmd->add_flag("--multi", b.multi, "place the first three needles at random depths");
  build_cmd->add_flag("--shuffle", b.shuffle, "shuffle document order");
  build_cmd->add_option("--out", b.out, "write context.txt, prompt.txt and meta.json here");

  auto* run_cmd = app.add_subcommand("run", "execute a run config, appending to a results file");
  std::string run_config, run_out;
  bool no_resume = false;
  run_cmd->add_option("--config", run_config, "run config JSON")->required();
  run_cmd->add_option("--out", run_out, "results JSONL")->required();
  run_cmd->add_flag("--no-resume", no_resume, "truncate the results file instead of resuming");

  auto* agg_cmd = app.add_subcommand("aggregate", "summary, percent-change and heatmap tables");
  std::string agg_in, agg_tables, agg_std = "per_trial_mean";
  agg_cmd->add_option("results", agg_in, "results JSONL")->required();
  agg_cmd->add_option("--tables", agg_tables, "output directory")->required();
  agg_cmd->add_option("--std", agg_std, "per_trial_mean or pooled");

  auto* ft_cmd = app.add_subcommand("gen-finetune", "write a pause-tuning dataset and training config");
  std::string ft_config, ft_out;
  ft_cmd->add_option("--config", ft_config, "fine-tune config JSON")->required();
  ft_cmd->add_option("--out", ft_out, "output directory")->required();

  auto* attn_cmd = app.add_subcommand("attn", "attention dump analysis");
  attn_cmd->require_subcommand(1);
  auto* report_cmd = attn_cmd->add_subcommand("report", "spike ratios and cross-technique comparison");
  std::vector<std::string> dumps;
  std::string attn_out;
  int window = kDefaultSpikeWindow;
  report_cmd->add_option("--dumps", dumps, "attention dump JSON files")->required();
  report_cmd->add_option("--out", attn_out, "output directory")->required();
  report_cmd->add_option("--window", window, "odd spike window width");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("%^%l%$: %v");

  try {
    if (*stats_cmd) return corpus_stats(stats_dir, stats_glob, stats_vocab);
    if (*build_cmd) return build(b);
    if (*run_cmd) return run(run_config, run_out, !no_resume);
    if (*agg_cmd) return aggregate(agg_in, agg_tables, agg_std);
    if (*ft_cmd) return gen_finetune(ft_config, ft_out);
    if (*report_cmd) return attn_report(dumps, attn_out, window);
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  }
  return 0;
}
