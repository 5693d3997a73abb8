#pragma once

#include <string>
#include <string_view>

#include "pausebench/client.hpp"

namespace pausebench {

class JudgeParseError : public ParseError {
 public:
  JudgeParseError(const std::string& what, std::string raw)
      : ParseError(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

// First integer in [1, 10] scanning left to right that is not adjacent to
// another digit. Throws ParseError when none exists.
int parse_score(std::string_view text);

std::string render_judge_prompt(std::string_view question, std::string_view reference,
                                std::string_view answer);

struct JudgeOutcome {
  int score = 0;
  std::string raw;  // every judge reply, joined with "\n---\n" after a re-ask
};

// Asks the judge once; if the reply has no score, re-asks once for a bare
// integer. Throws JudgeParseError when both replies are unparseable.
JudgeOutcome judge_score(std::string_view answer, std::string_view reference,
                         std::string_view question, const ModelProfile& judge,
                         const ChatClient& client);

}  // namespace pausebench
