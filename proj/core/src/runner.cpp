#include "pausebench/runner.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "pausebench/error.hpp"
#include "pausebench/judge.hpp"

namespace pausebench {

namespace {

std::string pad2(int v) { return v < 10 ? "0" + std::to_string(v) : std::to_string(v); }

ModelProfile parse_profile(const nlohmann::json& j, int default_max_output) {
  ModelProfile p;
  p.name = j.at("name").get<std::string>();
  p.base_url = j.at("base_url").get<std::string>();
  p.api_key_env = j.value("api_key_env", "");
  p.max_context_tokens = j.value("max_context_tokens", std::size_t{16000});
  p.temperature = j.value("temperature", 0.0);
  p.max_output_tokens = j.value("max_output_tokens", default_max_output);
  p.model_id = j.value("model", "");
  p.system_prompt = j.value("system_prompt", "");
  p.timeout_ms = j.value("timeout_ms", 120000);
  validate(p);
  return p;
}

TechniqueId technique_from_json(const nlohmann::json& j) {
  const std::string name = j.get<std::string>();
  auto id = parse_technique(name);
  if (!id) throw ParseError("unknown technique '" + name + "'");
  return *id;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

}  // namespace

std::string_view to_string(RunMode mode) { return mode == RunMode::single ? "single" : "multi"; }

RunMode parse_run_mode(std::string_view text) {
  if (text == "single") return RunMode::single;
  if (text == "multi") return RunMode::multi;
  throw ParseError("mode must be 'single' or 'multi', got '" + std::string(text) + "'");
}

std::string RunSpec::key() const {
  return model + "|" + std::string(to_string(technique)) + "|" + placement_key();
}

std::string RunSpec::placement_key() const {
  std::string k = std::string(to_string(mode)) + "|" + std::to_string(context_tokens);
  if (mode == RunMode::single) k += "|d" + pad2(depth_index);
  return k + "|t" + pad2(trial);
}

void to_json(nlohmann::ordered_json& j, const TrialResult& r) {
  j = nlohmann::ordered_json::object();
  j["key"] = r.key;
  j["model"] = r.model;
  j["technique"] = r.technique;
  j["mode"] = std::string(to_string(r.mode));
  j["context_tokens"] = r.context_tokens;
  j["depth_pct"] = r.depth_pct ? nlohmann::ordered_json(*r.depth_pct) : nlohmann::ordered_json();
  j["trial"] = r.trial;
  j["score"] = r.score ? nlohmann::ordered_json(*r.score) : nlohmann::ordered_json();
  j["answer"] = r.answer;
  j["judge_raw"] = r.judge_raw;
  j["achieved_depths"] = r.achieved_depths;
  j["pause_overhead_tokens"] = r.pause_overhead_tokens;
  j["error"] = r.error ? nlohmann::ordered_json(*r.error) : nlohmann::ordered_json();
  j["started_at"] = r.started_at;
  j["finished_at"] = r.finished_at;
}

void from_json(const nlohmann::json& j, TrialResult& r) {
  r.key = j.at("key").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.technique = j.at("technique").get<std::string>();
  r.mode = parse_run_mode(j.at("mode").get<std::string>());
  r.context_tokens = j.at("context_tokens").get<std::size_t>();
  const auto& depth = j.at("depth_pct");
  r.depth_pct = depth.is_null() ? std::nullopt : std::optional<double>(depth.get<double>());
  r.trial = j.at("trial").get<int>();
  const auto& score = j.at("score");
  r.score = score.is_null() ? std::nullopt : std::optional<int>(score.get<int>());
  if (r.score && (*r.score < 1 || *r.score > 10)) {
    throw ParseError("row " + r.key + ": score " + std::to_string(*r.score) + " outside [1, 10]");
  }
  r.answer = j.at("answer").get<std::string>();
  r.judge_raw = j.at("judge_raw").get<std::string>();
  r.achieved_depths = j.at("achieved_depths").get<std::vector<double>>();
  r.pause_overhead_tokens = j.at("pause_overhead_tokens").get<long>();
  const auto& error = j.at("error");
  r.error = error.is_null() ? std::nullopt : std::optional<std::string>(error.get<std::string>());
  r.started_at = j.at("started_at").get<std::string>();
  r.finished_at = j.at("finished_at").get<std::string>();
}

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  try {
    for (const auto& m : j.at("models")) {
      ModelEntry entry;
      entry.profile = parse_profile(m, 256);
      if (m.contains("finetuned")) {
        for (const auto& [tech, profile] : m.at("finetuned").items()) {
          auto id = parse_technique(tech);
          if (!id) throw ParseError("unknown technique '" + tech + "' in finetuned endpoints");
          entry.finetuned.emplace(*id, parse_profile(profile, 256));
        }
      }
      c.models.push_back(std::move(entry));
    }
    if (j.contains("judge")) c.judge = parse_profile(j.at("judge"), 16);
    for (const auto& t : j.at("techniques")) c.techniques.push_back(technique_from_json(t));
    c.lengths = j.at("lengths").get<std::vector<std::size_t>>();
    c.mode = parse_run_mode(j.value("mode", "single"));
    c.depth_count = j.value("depths", 15);
    c.single_trials = j.value("trials", 3);
    c.multi_trials = j.value("multi_trials", 15);
    c.seed = j.value("seed", std::uint64_t{42});
    c.concurrency = j.value("concurrency", std::size_t{4});
    c.shuffle_documents = j.value("shuffle_documents", true);
    c.corpus_dir = resolve(base_dir, j.at("corpus").get<std::string>());
    c.corpus_glob = j.value("corpus_glob", "*.txt");
    c.vocab_path = resolve(base_dir, j.at("vocab").get<std::string>());
    c.needles_path = resolve(base_dir, j.at("needles").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("run config: ") + e.what());
  }
  if (c.models.empty()) throw ParseError("run config names no models");
  if (c.techniques.empty()) throw ParseError("run config names no techniques");
  if (c.lengths.empty()) throw ParseError("run config has an empty length ladder");
  for (std::size_t len : c.lengths) {
    if (std::find(std::begin(kContextLadder), std::end(kContextLadder), len) == std::end(kContextLadder)) {
      throw ParseError("context length " + std::to_string(len) + " is not on the 1K..128K ladder");
    }
  }
  if (c.single_trials < 1 || c.single_trials > 3) throw ParseError("trials must be in [1, 3]");
  if (c.multi_trials < 1 || c.multi_trials > 15) throw ParseError("multi_trials must be in [1, 15]");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

std::vector<RunSpec> plan_runs(const RunConfig& config) {
  std::vector<std::size_t> lengths = config.lengths;
  std::sort(lengths.begin(), lengths.end());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());
  const std::vector<double> depths =
      config.mode == RunMode::single ? depth_grid(config.depth_count) : std::vector<double>{};

  std::vector<RunSpec> plan;
  for (const ModelEntry& model : config.models) {
    for (TechniqueId tech : config.techniques) {
      const ModelProfile* target = &model.profile;
      if (technique(tech).requires_finetuned_model) {
        auto it = model.finetuned.find(tech);
        if (it == model.finetuned.end()) {
          throw InvalidArgument("technique " + std::string(to_string(tech)) +
                                " needs a fine-tuned endpoint for model " + model.profile.name);
        }
        target = &it->second;
      }
      for (std::size_t len : lengths) {
        if (len > target->max_context_tokens) continue;
        RunSpec spec{model.profile.name, tech, len, config.mode};
        if (config.mode == RunMode::single) {
          for (std::size_t d = 0; d < depths.size(); ++d) {
            for (int t = 0; t < config.single_trials; ++t) {
              spec.depth_index = static_cast<int>(d);
              spec.depth_pct = depths[d];
              spec.trial = t;
              plan.push_back(spec);
            }
          }
        } else {
          for (int t = 0; t < config.multi_trials; ++t) {
            spec.trial = t;
            plan.push_back(spec);
          }
        }
      }
    }
  }
  return plan;
}

std::vector<TrialResult> load_results(const std::filesystem::path& path) {
  std::vector<TrialResult> out;
  if (!std::filesystem::exists(path)) return out;
  const std::string contents = read_file(path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < contents.size()) {
    std::size_t eol = contents.find('\n', pos);
    const bool terminated = eol != std::string::npos;
    if (!terminated) eol = contents.size();
    std::string_view line(contents.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<TrialResult>());
    } catch (const std::exception& e) {
      // An unterminated last line is a write cut short by a kill.
      if (!terminated) break;
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Runner::Runner(RunConfig config, Corpus corpus, const Tokenizer& tokenizer, std::vector<NeedleSpec> needles,
               const ChatClient& client)
    : config_(std::move(config)),
      corpus_(std::move(corpus)),
      tokenizer_(tokenizer),
      needles_(std::move(needles)),
      client_(client),
      limiter_(config_.concurrency) {
  if (needles_.empty()) throw InvalidArgument("needle pool is empty");
  if (config_.mode == RunMode::multi && needles_.size() < 3) {
    throw InvalidArgument("multi-needle runs need at least 3 needles in the pool");
  }
}

std::string multi_needle_question(const std::vector<NeedleSpec>& needles) {
  std::string q = "Answer each of the following questions using only the context.";
  for (std::size_t i = 0; i < needles.size(); ++i) q += "\n" + std::to_string(i + 1) + ". " + needles[i].question;
  return q;
}

std::string multi_needle_reference(const std::vector<NeedleSpec>& needles) {
  std::string ref;
  for (const NeedleSpec& n : needles) {
    if (!ref.empty()) ref += " ";
    ref += n.needle;
  }
  return ref;
}

const Haystack& Runner::haystack_for(const RunSpec& spec) const {
  // Shared by every depth, model and technique of one (length, trial).
  const std::string label = "haystack|" + std::string(to_string(spec.mode)) + "|" +
                            std::to_string(spec.context_tokens) + "|t" + pad2(spec.trial);
  {
    std::lock_guard lock(cache_mu_);
    auto it = haystacks_.find(label);
    if (it != haystacks_.end()) return it->second;
  }
  Haystack h = build_haystack(corpus_, spec.context_tokens, tokenizer_, derive_seed(config_.seed, label),
                              config_.shuffle_documents ? DocumentOrder::shuffled : DocumentOrder::corpus);
  std::lock_guard lock(cache_mu_);
  return haystacks_.emplace(label, std::move(h)).first->second;
}

const ModelProfile& Runner::target_for(const RunSpec& spec) const {
  for (const ModelEntry& m : config_.models) {
    if (m.profile.name != spec.model) continue;
    if (!technique(spec.technique).requires_finetuned_model) return m.profile;
    auto it = m.finetuned.find(spec.technique);
    if (it != m.finetuned.end()) return it->second;
    throw InvalidArgument("no fine-tuned endpoint for " + spec.model);
  }
  throw InvalidArgument("unknown model " + spec.model);
}

PreparedTrial Runner::prepare(const RunSpec& spec) const {
  const Haystack& haystack = haystack_for(spec);
  PreparedTrial out;
  if (spec.mode == RunMode::single) {
    const NeedleSpec& needle = needles_.front();
    out.placed = place_needle(haystack, needle, spec.depth_pct, tokenizer_);
    out.question = needle.question;
    out.reference = needle.reference_answer;
  } else {
    std::vector<NeedleSpec> trio(needles_.begin(), needles_.begin() + 3);
    Rng rng(derive_seed(config_.seed, "needles|" + spec.placement_key()));
    out.placed = place_needles(haystack, trio, rng, tokenizer_);
    out.question = multi_needle_question(trio);
    out.reference = multi_needle_reference(trio);
  }

  const Technique& tech = technique(spec.technique);
  InjectedContext injected = inject_pauses(out.placed.text, tech.injection);
  if (tech.injection != InjectionMode::none) {
    out.pause_overhead_tokens = static_cast<long>(tokenizer_.count_tokens(injected.text)) -
                                static_cast<long>(tokenizer_.count_tokens(out.placed.text));
  }
  out.prompt = render_prompt(tech, injected.text, out.question, injected.pause_offsets);
  const ModelProfile& target = target_for(spec);
  if (!target.system_prompt.empty()) {
    out.prompt.messages.insert(out.prompt.messages.begin(), Message{Role::system, target.system_prompt});
  }
  return out;
}

TrialResult Runner::run_trial(const RunSpec& spec) const {
  TrialResult r;
  r.key = spec.key();
  r.model = spec.model;
  r.technique = std::string(to_string(spec.technique));
  r.mode = spec.mode;
  r.context_tokens = spec.context_tokens;
  if (spec.mode == RunMode::single) r.depth_pct = spec.depth_pct;
  r.trial = spec.trial;
  r.started_at = utc_timestamp();

  try {
    PreparedTrial prepared = prepare(spec);
    r.achieved_depths = prepared.placed.achieved_depths_pct;
    r.pause_overhead_tokens = prepared.pause_overhead_tokens;
    {
      InflightLimiter::Guard guard(&limiter_);
      r.answer = client_.complete(target_for(spec), prepared.prompt.messages).text;
    }
    if (!config_.judge) throw InvalidArgument("run config has no judge profile");
    try {
      InflightLimiter::Guard guard(&limiter_);
      JudgeOutcome outcome = judge_score(r.answer, prepared.reference, prepared.question, *config_.judge, client_);
      r.score = outcome.score;
      r.judge_raw = std::move(outcome.raw);
    } catch (const JudgeParseError& e) {
      r.judge_raw = e.raw();
      r.error = std::string("judge-parse: ") + e.what();
    }
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.finished_at = utc_timestamp();
  if (r.error) spdlog::warn("{}: {}", r.key, *r.error);
  return r;
}

RunReport Runner::execute(const std::vector<RunSpec>& plan, const std::filesystem::path& results_path,
                          const ExecuteOptions& options) {
  RunReport report;
  report.planned = plan.size();

  std::set<std::string> done;
  if (options.resume && std::filesystem::exists(results_path)) {
    for (const TrialResult& r : load_results(results_path)) done.insert(r.key);
    // Drop a partial trailing line so appends start on a fresh line.
    std::string contents = read_file(results_path);
    if (!contents.empty() && contents.back() != '\n') {
      const std::size_t last = contents.rfind('\n');
      contents.resize(last == std::string::npos ? 0 : last + 1);
      write_file(results_path, contents);
    }
  } else {
    write_file(results_path, "");
  }

  std::vector<const RunSpec*> todo;
  for (const RunSpec& spec : plan) {
    if (done.insert(spec.key()).second) {
      todo.push_back(&spec);
    } else {
      ++report.skipped;
    }
  }
  if (options.max_new_trials > 0 && todo.size() > options.max_new_trials) todo.resize(options.max_new_trials);

  std::ofstream out(results_path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + results_path.string());
  std::mutex write_mu;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failed{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      TrialResult r = run_trial(*todo[i]);
      if (r.error) ++failed;
      nlohmann::ordered_json j = r;
      // Replies cut mid-codepoint must not abort the run.
      const std::string line = j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) + "\n";
      std::lock_guard lock(write_mu);
      out << line;
      out.flush();
    }
  };

  const std::size_t threads = std::min<std::size_t>(std::max<std::size_t>(config_.concurrency, 1), todo.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    if (threads > 0) worker();
  }

  report.executed = todo.size();
  report.failed = failed.load();
  return report;
}

}  // namespace pausebench
