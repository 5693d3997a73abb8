#include "pausebench/prompts.hpp"

#include <array>

#include "pausebench/error.hpp"

namespace pausebench {

namespace {

// Byte-identical to templates/plain.txt and templates/pause_aware.txt.
constexpr std::string_view kPlainTemplate =
    "Below is an instruction that describes a task, paired with a context that provides further "
    "information. An input will request information from the context. Write a response that "
    "appropriately completes the request.\n"
    "\n"
    "###Instruction:\n"
    "\n"
    "You are a helpful assistant that will be provided a context which the user wants to ask a "
    "question about, your job is to answer the question with only statements provided in the "
    "context and nothing else.\n"
    "\n"
    "###Context:\n"
    "\n"
    "{context}\n"
    "\n"
    "###Input:\n"
    "\n"
    "{input}";

constexpr std::string_view kPauseAwareTemplate =
    "Below is an instruction that describes a task, paired with a context that provides further "
    "information. An input will request information from the context. Write a response that "
    "appropriately completes the request.\n"
    "\n"
    "###Instruction:\n"
    "\n"
    "You are a helpful assistant that will be provided a context which the user wants to ask a "
    "question about, the context has <PAUSE> tokens that tell you when to take a pause to "
    "comprehend the context before continuing, your job is to answer the question with only "
    "statements provided in the context and nothing else.\n"
    "\n"
    "###Context:\n"
    "\n"
    "{context}\n"
    "\n"
    "###Input:\n"
    "\n"
    "{input}";

// Byte-identical to templates/judge.txt.
constexpr std::string_view kJudgeTemplate =
    "You are grading a retrieval task. Compare the answer with the reference and rate it on a "
    "scale from 1 to 10 using this rubric:\n"
    "\n"
    "Score 1: The answer is completely unrelated to the reference.\n"
    "Score 3: The answer has minor relevance but does not align with the reference.\n"
    "Score 5: The answer has moderate relevance but contains inaccuracies.\n"
    "Score 7: The answer aligns with the reference but has minor omissions.\n"
    "Score 10: The answer is completely accurate and aligns perfectly with the reference.\n"
    "\n"
    "Scores between the anchors are allowed. Reply with the score only, as a single integer "
    "from 1 to 10.\n"
    "\n"
    "[Question]\n"
    "{question}\n"
    "\n"
    "[Reference]\n"
    "{reference}\n"
    "\n"
    "[Answer]\n"
    "{answer}";

constexpr std::string_view kContextSlot = "{context}";
constexpr std::string_view kInputSlot = "{input}";

const std::vector<Technique> kCatalog = {
    {TechniqueId::baseline, InjectionMode::none, TemplateKind::plain, false},
    {TechniqueId::t1_standard, InjectionMode::standard, TemplateKind::plain, false},
    {TechniqueId::t2_instruction_augmented, InjectionMode::augmented, TemplateKind::plain, false},
    {TechniqueId::t3_preprompt, InjectionMode::standard, TemplateKind::pause_aware, false},
    {TechniqueId::t4_finetuned_plain, InjectionMode::none, TemplateKind::plain, true},
    {TechniqueId::t5_pause_tuned, InjectionMode::standard, TemplateKind::pause_aware, true},
};

constexpr std::array<std::string_view, 6> kTechniqueNames = {
    "baseline", "t1_standard", "t2_instruction_augmented", "t3_preprompt", "t4_finetuned_plain",
    "t5_pause_tuned"};

std::string_view insertion_for(InjectionMode mode) {
  switch (mode) {
    case InjectionMode::standard:
      return kStandardInsertion;
    case InjectionMode::augmented:
      return kAugmentedInsertion;
    case InjectionMode::none:
      break;
  }
  throw InvalidArgument("no insertion text for injection mode none");
}

bool blank_line(std::string_view line) {
  for (char c : line) {
    if (c != ' ' && c != '\t' && c != '\r' && c != '\f' && c != '\v') return false;
  }
  return true;
}

// Byte offset just past the last character of every paragraph.
std::vector<std::size_t> paragraph_ends(std::string_view text) {
  std::vector<std::size_t> ends;
  bool in_paragraph = false;
  std::size_t last_line_end = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (blank_line(line)) {
      if (in_paragraph) ends.push_back(last_line_end);
      in_paragraph = false;
    } else {
      in_paragraph = true;
      last_line_end = eol;
    }
    if (eol == text.size()) break;
    pos = eol + 1;
  }
  if (in_paragraph) ends.push_back(last_line_end);
  return ends;
}

}  // namespace

std::string_view to_string(TechniqueId id) { return kTechniqueNames[static_cast<std::size_t>(id)]; }

std::optional<TechniqueId> parse_technique(std::string_view name) {
  for (std::size_t i = 0; i < kTechniqueNames.size(); ++i) {
    if (kTechniqueNames[i] == name) return static_cast<TechniqueId>(i);
  }
  // Short aliases: "t1".."t5".
  if (name.size() == 2 && name[0] == 't' && name[1] >= '1' && name[1] <= '5') {
    return static_cast<TechniqueId>(name[1] - '0');
  }
  return std::nullopt;
}

const std::vector<Technique>& technique_catalog() { return kCatalog; }

const Technique& technique(TechniqueId id) { return kCatalog[static_cast<std::size_t>(id)]; }

InjectedContext inject_pauses(std::string_view context, InjectionMode mode) {
  InjectedContext out;
  if (mode == InjectionMode::none) {
    out.text.assign(context);
    return out;
  }
  const std::string_view insertion = insertion_for(mode);
  const std::size_t marker_at = insertion.find(kPauseMarker);
  std::size_t copied = 0;
  for (std::size_t end : paragraph_ends(context)) {
    out.text.append(context.substr(copied, end - copied));
    copied = end;
    out.insert_offsets.push_back(out.text.size());
    out.pause_offsets.push_back(out.text.size() + marker_at);
    out.text.append(insertion);
  }
  out.text.append(context.substr(copied));
  return out;
}

std::string strip_pauses(const InjectedContext& injected, InjectionMode mode) {
  if (mode == InjectionMode::none) return injected.text;
  const std::size_t len = insertion_for(mode).size();
  std::string out;
  std::size_t copied = 0;
  for (std::size_t at : injected.insert_offsets) {
    out.append(injected.text, copied, at - copied);
    copied = at + len;
  }
  out.append(injected.text, copied, std::string::npos);
  return out;
}

std::string_view prompt_template(TemplateKind kind) {
  return kind == TemplateKind::plain ? kPlainTemplate : kPauseAwareTemplate;
}

std::string_view judge_template() { return kJudgeTemplate; }

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system:
      return "system";
    case Role::user:
      return "user";
    case Role::assistant:
      return "assistant";
  }
  return "user";
}

std::string fill_template(std::string_view tmpl, std::string_view context, std::string_view input) {
  const std::size_t c = tmpl.find(kContextSlot);
  if (c == std::string_view::npos) throw Error("template has no {context} placeholder");
  const std::size_t i = tmpl.find(kInputSlot, c + kContextSlot.size());
  if (i == std::string_view::npos) throw Error("template has no {input} placeholder after {context}");
  std::string out;
  out.reserve(tmpl.size() + context.size() + input.size());
  out.append(tmpl.substr(0, c));
  out.append(context);
  out.append(tmpl.substr(c + kContextSlot.size(), i - c - kContextSlot.size()));
  out.append(input);
  out.append(tmpl.substr(i + kInputSlot.size()));
  return out;
}

RenderedPrompt render_prompt(TemplateKind kind, std::string_view context, std::string_view question,
                             const std::vector<std::size_t>& context_pause_offsets) {
  const std::string_view tmpl = prompt_template(kind);
  RenderedPrompt out;
  out.messages.push_back({Role::user, fill_template(tmpl, context, question)});
  const std::size_t base = tmpl.find(kContextSlot);
  for (std::size_t off : context_pause_offsets) out.pause_positions.push_back(base + off);
  return out;
}

RenderedPrompt render_prompt(const Technique& tech, std::string_view context, std::string_view question,
                             const std::vector<std::size_t>& context_pause_offsets) {
  return render_prompt(tech.prompt_template, context, question, context_pause_offsets);
}

}  // namespace pausebench
