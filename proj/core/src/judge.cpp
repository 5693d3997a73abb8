#include "pausebench/judge.hpp"

#include "pausebench/prompts.hpp"

namespace pausebench {

namespace {

constexpr std::string_view kReask = "Reply with only a single integer from 1 to 10.";

bool is_digit(char c) { return c >= '0' && c <= '9'; }

void replace_once(std::string& s, std::string_view slot, std::string_view value, std::size_t& from) {
  const std::size_t at = s.find(slot, from);
  if (at == std::string::npos) throw Error("judge template is missing " + std::string(slot));
  s.replace(at, slot.size(), value);
  from = at + value.size();
}

}  // namespace

int parse_score(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_digit(text[j])) ++j;
    std::string_view run = text.substr(i, j - i);
    if (run.size() <= 2) {
      int value = 0;
      for (char c : run) value = value * 10 + (c - '0');
      if (value >= 1 && value <= 10 && !(run.size() == 2 && run[0] == '0')) return value;
    }
    i = j;
  }
  throw ParseError("no score between 1 and 10 in judge reply: \"" + std::string(text.substr(0, 120)) + "\"");
}

std::string render_judge_prompt(std::string_view question, std::string_view reference,
                                std::string_view answer) {
  std::string out(judge_template());
  std::size_t from = 0;
  // Slots appear in this order; substituted text is never rescanned.
  replace_once(out, "{question}", question, from);
  replace_once(out, "{reference}", reference, from);
  replace_once(out, "{answer}", answer, from);
  return out;
}

JudgeOutcome judge_score(std::string_view answer, std::string_view reference, std::string_view question,
                         const ModelProfile& judge, const ChatClient& client) {
  if (reference.empty()) throw InvalidArgument("judge_score needs a non-empty reference");
  std::vector<Message> messages;
  if (!judge.system_prompt.empty()) messages.push_back({Role::system, judge.system_prompt});
  messages.push_back({Role::user, render_judge_prompt(question, reference, answer)});

  JudgeOutcome outcome;
  CompletionResult first = client.complete(judge, messages);
  outcome.raw = first.text;
  try {
    outcome.score = parse_score(first.text);
    return outcome;
  } catch (const ParseError&) {
  }

  messages.push_back({Role::assistant, first.text});
  messages.push_back({Role::user, std::string(kReask)});
  CompletionResult second = client.complete(judge, messages);
  outcome.raw += "\n---\n" + second.text;
  try {
    outcome.score = parse_score(second.text);
  } catch (const ParseError& e) {
    throw JudgeParseError(e.what(), outcome.raw);
  }
  return outcome;
}

}  // namespace pausebench
