// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "bpe_oracle.hpp"
#include "pausebench/attnviz.hpp"
#include "pausebench/finetune.hpp"
#include "pausebench/haystack.hpp"
#include "pausebench/prompts.hpp"
#include "pausebench/runner.hpp"
#include "pausebench/stats.hpp"
#include "pausebench/util.hpp"
#include "stub_server.hpp"

using namespace pausebench;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = PAUSEBENCH_FIXTURES;

struct Check {
  std::ostringstream why;
  bool ok = true;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) why << what;
    ok = ok && cond;
  }
};

const Tokenizer& vocab() {
  static const Tokenizer tok = load_vocab(kFixtures + "/test_vocab.ranks");
  return tok;
}

const Corpus& corpus() {
  static const Corpus c = load_corpus(kFixtures + "/corpus");
  return c;
}

std::size_t count_of(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string_view::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// 1. Percent change from the published per-length means.
void published_percent_change(Check& c) {
  const auto all = parse_summary_csv(read_file(kFixtures + "/published_means.csv"));
  auto pc = [&](const std::string& model, const std::string& tech) {
    std::vector<Summary> base, t;
    for (const Summary& s : all) {
      if (s.model != model) continue;
      if (s.technique == "baseline") base.push_back(s);
      if (s.technique == tech) t.push_back(s);
    }
    return percent_change(base, t);
  };
  auto near = [&](double got, double want, double tol, const std::string& label) {
    c.expect(std::abs(got - want) <= tol, label + " = " + fmt(got) + ", want " + fmt(want) + " +/- " + fmt(tol));
  };
  const auto gpt = pc("gpt-3.5", "t1_standard");
  near(gpt.averaged, 0.37, 0.02, "gpt-3.5 t1");
  c.expect(gpt.per_length.size() == 5, "gpt-3.5 t1 should cover 5 lengths");
  near(pc("llama-3.1-8b", "t5_pause_tuned").averaged, 3.57, 0.05, "llama-3.1-8b t5");
  near(pc("llama-3.2-3b", "t5_pause_tuned").averaged, 10.61, 0.15, "llama-3.2-3b t5");
  near(pc("llama-3.1-8b", "t4_finetuned_plain").averaged, -42.88, 0.10, "llama-3.1-8b t4");
  near(pc("llama-3.1-8b", "t5_pause_tuned").per_length.at(64000), 16.10, 0.01, "llama-3.1-8b t5 @64K");
  near(pc("llama-3.2-3b", "t5_pause_tuned").per_length.at(32000), 67.73, 0.01, "llama-3.2-3b t5 @32K");
}

std::vector<std::string> needle_texts(const std::vector<NeedleSpec>& ns) {
  std::vector<std::string> out;
  for (const auto& n : ns) out.push_back(n.needle);
  return out;
}

// 2. Stubbed end-to-end with an interrupted and resumed run.
void end_to_end(Check& c) {
  const auto needles = load_needles(kFixtures + "/needles.json");
  testsupport::StubServer model(testsupport::needle_echo_model(needle_texts(needles)));
  testsupport::StubServer judge(testsupport::containment_judge());
  ChatClient client;

  RunConfig config;
  ModelProfile target;
  target.name = "stub-model";
  target.base_url = model.base_url();
  target.timeout_ms = 10000;
  config.models.push_back({target, {}});
  ModelProfile jp;
  jp.name = "stub-judge";
  jp.base_url = judge.base_url();
  jp.max_output_tokens = 16;
  jp.timeout_ms = 10000;
  config.judge = jp;
  config.techniques = {TechniqueId::baseline, TechniqueId::t1_standard};
  config.lengths = {1000, 2000};
  config.concurrency = 4;

  const auto plan = plan_runs(config);
  c.expect(plan.size() == 180, "plan has " + std::to_string(plan.size()) + " specs, want 180");
  const fs::path dir = fs::temp_directory_path() / "pausebench_acceptance_e2e";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path out = dir / "results.jsonl";

  {
    Runner first(config, corpus(), vocab(), needles, client);
    ExecuteOptions half;
    half.max_new_trials = plan.size() / 2;
    first.execute(plan, out, half);
  }
  // The kill lands mid-write of the next row.
  write_file(out, read_file(out) + R"({"key":"stub-model|t1_standard|single|2000|d14|t02","model":"stub)");
  const int model_calls_before = model.request_count();
  c.expect(model_calls_before == 90, "first half made " + std::to_string(model_calls_before) + " model calls");

  Runner second(config, corpus(), vocab(), needles, client);
  const RunReport report = second.execute(plan, out);
  c.expect(report.skipped == 90 && report.executed == 90,
           "resume skipped " + std::to_string(report.skipped) + ", executed " + std::to_string(report.executed));

  // Zero duplicate requests: one target call and one judge call per spec.
  c.expect(model.request_count() == 180, "model saw " + std::to_string(model.request_count()) + " requests");
  c.expect(judge.request_count() == 180, "judge saw " + std::to_string(judge.request_count()) + " requests");
  // Trials may share a haystack, so prompts can repeat across specs; the
  // requests must still match the plan's prompts one for one.
  std::multiset<std::string> sent, planned;
  for (const auto& r : model.requests()) sent.insert(testsupport::user_content(r));
  for (const RunSpec& spec : plan) planned.insert(second.prepare(spec).prompt.messages.back().content);
  c.expect(sent == planned, "model requests differ from the planned prompts");

  const auto rows = load_results(out);
  std::set<std::string> keys;
  for (const auto& r : rows) {
    keys.insert(r.key);
    c.expect(r.score && *r.score == 10, "row " + r.key + " scored " + (r.score ? std::to_string(*r.score) : "none"));
  }
  c.expect(rows.size() == 180 && keys.size() == 180, "results file has " + std::to_string(rows.size()) + " rows");

  const auto summaries = summarize(rows);
  c.expect(summaries.size() == 4, "want 4 summary groups");
  for (const Summary& s : summaries) {
    c.expect(std::abs(s.mean - 10.0) < 0.005 && std::abs(s.std) < 0.005,
             s.technique + " mean " + fmt(s.mean) + " std " + fmt(s.std));
  }
  for (const auto& row : percent_change_table(summaries)) {
    for (const auto& [len, v] : row.per_length) c.expect(v == 0.0, "percent change " + fmt(v) + " at " + std::to_string(len));
    c.expect(row.averaged == 0.0, "averaged percent change " + fmt(row.averaged));
  }
}

// 3. Injection round trips on random paragraphs, plus template goldens.
void injection(Check& c) {
  Rng rng(3);
  const std::string alphabet = "abcdefghij KLMNOP.,;<>!?'\"\t";
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> paras(1 + rng.below(12));
    std::string text;
    for (auto& p : paras) {
      const auto lines = 1 + rng.below(3);
      for (std::uint64_t l = 0; l < lines; ++l) {
        if (l) p += '\n';
        const auto len = 1 + rng.below(40);
        std::string line;
        for (std::uint64_t k = 0; k < len; ++k) line.push_back(alphabet[rng.below(alphabet.size())]);
        line.front() = 'x';
        p += line;
      }
      if (!text.empty()) text += "\n\n";
      text += p;
    }
    for (auto mode : {InjectionMode::standard, InjectionMode::augmented}) {
      const auto inj = inject_pauses(text, mode);
      c.expect(inj.pause_offsets.size() == paras.size(), "pause count differs from paragraph count in case " + std::to_string(i));
      c.expect(strip_pauses(inj, mode) == text, "strip did not restore case " + std::to_string(i));
    }
    const auto base = render_prompt(technique(TechniqueId::baseline), text, "Where?");
    c.expect(count_of(base.messages[0].content, kPauseMarker) == 0, "baseline render carries a marker");
  }
  c.expect(fill_template(prompt_template(TemplateKind::plain), "", "") == read_file(kFixtures + "/golden/plain_empty.txt"),
           "plain template differs from golden");
  c.expect(fill_template(prompt_template(TemplateKind::pause_aware), "", "") ==
               read_file(kFixtures + "/golden/pause_aware_empty.txt"),
           "pause-aware template differs from golden");
}

// 4. Needle placement on an 8K haystack.
void placement(Check& c) {
  const Haystack h = build_haystack(corpus(), 8000, vocab(), 42);
  const std::string original = h.text();
  const auto needles = load_needles(kFixtures + "/needles.json");
  double worst = 0.0;
  for (double depth : depth_grid(15)) {
    const PlacedContext p = place_needle(h, needles[0], depth, vocab());
    worst = std::max(worst, std::abs(p.achieved_depths_pct[0] - depth));
  }
  c.expect(worst <= 1.5, "worst depth error " + fmt(worst) + " points");
  const auto first = place_needle(h, needles[0], 0.0, vocab());
  c.expect(first.text.rfind(needles[0].needle, 0) == 0, "depth 0 is not the first sentence");
  const auto last = place_needle(h, needles[0], 100.0, vocab());
  c.expect(last.text.size() >= needles[0].needle.size() &&
               last.text.compare(last.text.size() - needles[0].needle.size(), std::string::npos, needles[0].needle) == 0,
           "depth 100 is not the last sentence");
  Rng rng(500);
  int verbatim = 0;
  for (int i = 0; i < 500; ++i) {
    const NeedleSpec& n = needles[rng.below(needles.size())];
    const PlacedContext p = place_needle(h, n, rng.uniform(0.0, 100.0), vocab());
    const Span s = p.needle_spans[0];
    if (p.text.compare(s.offset, s.length, n.needle) == 0 && count_of(p.text, n.needle) == 1 &&
        remove_needles(p) == original) {
      ++verbatim;
    }
  }
  c.expect(verbatim == 500, std::to_string(verbatim) + "/500 placements verbatim");
}

// 5. Encoder against the brute-force merge loop.
void tokenizer(Check& c) {
  const testsupport::BpeOracle oracle(kFixtures + "/test_vocab.ranks");
  Rng rng(10000);
  // Half the strings draw from text-like bytes so merges fire often.
  const std::string texty = "etaoinshrdlu  \n\n.,the and of";
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    const auto len = rng.below(65);
    for (std::uint64_t k = 0; k < len; ++k) {
      s.push_back(i % 2 ? static_cast<char>(rng.below(256)) : texty[rng.below(texty.size())]);
    }
    if (vocab().encode(s) != oracle.encode(s)) ++mismatches;
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " of 10000 encodings differ from the oracle");
  for (const Document& d : corpus().documents) {
    c.expect(vocab().decode(vocab().encode(d.text)) == d.text, "round trip failed on " + d.doc_id);
  }
}

// 6. Fine-tune records and sidecar config.
void finetune(Check& c) {
  FinetuneConfig config;
  config.sizes = {1000, 2000, 4000, 8000};
  config.count_per_size = 2;
  config.needles = load_needles(kFixtures + "/needles.json");
  config.seed = 6;
  const fs::path dir = fs::temp_directory_path() / "pausebench_acceptance_ft";
  fs::remove_all(dir);
  const DatasetFiles files = gen_dataset(config, corpus(), vocab(), dir);
  const std::string_view tmpl = prompt_template(TemplateKind::pause_aware);
  const std::string_view prefix = tmpl.substr(0, tmpl.find("{context}"));
  std::istringstream lines(read_file(files.dataset));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const TrainingRecord r = nlohmann::json::parse(line).get<TrainingRecord>();
    ++n;
    bool from_pool = false;
    for (const auto& nd : config.needles) from_pool = from_pool || nd.needle == r.response;
    c.expect(count_of(r.context, r.response) == 1, "record " + std::to_string(n) + ": needle not exactly once");
    c.expect(from_pool, "record " + std::to_string(n) + ": response is not a verbatim needle");
    c.expect(render_training_prompt(r).rfind(prefix, 0) == 0, "record " + std::to_string(n) + ": template prefix");
  }
  c.expect(n == 8, "dataset has " + std::to_string(n) + " records, want 8");

  const auto cfg = nlohmann::json::parse(read_file(files.training_config));
  const nlohmann::json want = {
      {"lora",
       {{"rank", 16},
        {"alpha", 16},
        {"dropout", 0},
        {"target_modules", {"q_proj", "k_proj", "v_proj", "o_proj", "gate_proj", "up_proj", "down_proj"}}}},
      {"training",
       {{"batch_size", 2},
        {"gradient_accumulation_steps", 4},
        {"learning_rate", 2e-4},
        {"weight_decay", 0.01},
        {"warmup_steps", 6},
        {"steps", 60},
        {"lr_scheduler", "linear"},
        {"optimizer", "adamw_8bit"}}},
      {"other", {{"mixed_precision", "fp16"}, {"quantization_bits", 4}}}};
  c.expect(cfg == want, "training_config.json differs: " + cfg.dump());
}

// 7. Attention metrics on synthetic dumps.
void attention(Check& c) {
  const std::size_t n = 101;
  AttentionDump u;
  u.model_name = "synthetic";
  u.prompt_token_count = n;
  u.layers = {std::vector<double>(n, 1.0 / n)};
  u.pause_positions = {0, 30, 50, 100};
  u.needle_span = {10, 14};
  u.technique = "t1_standard";
  const SpikeReport ur = spike_report(u);
  for (double r : ur.per_layer[0].pause_spike_ratios) c.expect(std::abs(r - 1.0) < 1e-12, "uniform ratio " + fmt(r));
  c.expect(std::abs(ur.per_layer[0].tail_half_mass - 0.5) <= 1.0 / n, "uniform tail mass " + fmt(ur.per_layer[0].tail_half_mass));

  AttentionDump hot = u;
  hot.layers = {std::vector<double>(n, 0.0)};
  hot.layers[0][37] = 0.3;
  const auto norm = normalize(hot);
  c.expect(norm[0][37] == 1.0, "one-hot max is not 1 at the hot index");
  double rest = 0.0;
  for (std::size_t i = 0; i < n; ++i) rest += i == 37 ? 0.0 : norm[0][i];
  c.expect(rest == 0.0, "one-hot leaks mass off the hot index");

  const auto expected = nlohmann::json::parse(read_file(kFixtures + "/attn/expected.json"));
  double worst = 0.0;
  for (const char* t : {"baseline", "t1_standard", "t5_pause_tuned"}) {
    const AttentionDump d = load_attention_dump(kFixtures + "/attn/dump_" + std::string(t) + ".json");
    const auto nd = normalize(d);
    for (std::size_t l = 0; l < nd.size(); ++l) {
      const auto ref = expected[t][l]["normalized"].get<std::vector<double>>();
      for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - nd[l][i]));
    }
    if (d.pause_positions.empty()) continue;
    const SpikeReport r = spike_report(d);
    for (std::size_t l = 0; l < r.per_layer.size(); ++l) {
      const auto& e = expected[t][l];
      worst = std::max(worst, std::abs(r.per_layer[l].needle_region_mass - e["needle_region_mass"].get<double>()));
      worst = std::max(worst, std::abs(r.per_layer[l].tail_half_mass - e["tail_half_mass"].get<double>()));
      for (std::size_t i = 0; i < r.per_layer[l].pause_spike_ratios.size(); ++i) {
        worst = std::max(worst, std::abs(r.per_layer[l].pause_spike_ratios[i] - e["ratios"][i].get<double>()));
      }
    }
  }
  c.expect(worst < 1e-9, "oracle mismatch up to " + fmt(worst));
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Check&)> run;
    double budget_s;
  };
  const std::vector<Criterion> criteria = {
      {1, "percent change from published means", published_percent_change, 1.0},
      {2, "stubbed end-to-end with resume", end_to_end, 60.0},
      {3, "pause injection properties", injection, 0.0},
      {4, "needle placement properties", placement, 0.0},
      {5, "tokenizer oracle equivalence", tokenizer, 30.0},
      {6, "fine-tune dataset", finetune, 0.0},
      {7, "attention metrics on synthetic dumps", attention, 0.0},
  };
  int failed = 0;
  for (const Criterion& cr : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("threw: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.budget_s > 0 && secs > cr.budget_s) {
      check.expect(false, "took " + fmt(secs) + " s, budget " + fmt(cr.budget_s) + " s");
    }
    std::printf("[%s] %d. %s (%.2f s)%s%s\n", check.ok ? "PASS" : "FAIL", cr.id, cr.name, secs,
                check.ok ? "" : ": ", check.why.str().c_str());
    if (!check.ok) ++failed;
  }
  std::printf("[SKIP] 8. attention extraction from a live model (separate Python component)\n");
  std::fflush(stdout);
  return failed;
}
