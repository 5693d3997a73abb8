#include <gtest/gtest.h>

#include <optional>
#include <regex>

#include "pausebench/error.hpp"
#include "pausebench/judge.hpp"
#include "pausebench/util.hpp"
#include "stub_server.hpp"

using namespace pausebench;
using testsupport::StubReply;
using testsupport::StubServer;
using testsupport::completion_body;

namespace {

// Regex-based reference for the first standalone integer in [1, 10].
std::optional<int> oracle_score(const std::string& text) {
  static const std::regex digits("[0-9]+");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), digits); it != std::sregex_iterator(); ++it) {
    const std::string run = it->str();
    if (run == "10") return 10;
    if (run.size() == 1 && run != "0") return run[0] - '0';
  }
  return std::nullopt;
}

ModelProfile judge_for(const StubServer& s) {
  ModelProfile p;
  p.name = "judge";
  p.base_url = s.base_url();
  p.max_output_tokens = 16;
  return p;
}

}  // namespace

TEST(Judge, ParseScoreExamples) {
  EXPECT_EQ(parse_score("10"), 10);
  EXPECT_EQ(parse_score("7"), 7);
  EXPECT_EQ(parse_score("I rate this 3 out of 10"), 3);
  EXPECT_EQ(parse_score("Score: 10 \xe2\x80\x94 perfect match."), 10);
  EXPECT_EQ(parse_score("Score: 8/10"), 8);
  EXPECT_THROW(parse_score("100"), ParseError);
  EXPECT_THROW(parse_score("eleven"), ParseError);
  EXPECT_THROW(parse_score("0"), ParseError);
  EXPECT_THROW(parse_score("07"), ParseError);
  EXPECT_THROW(parse_score(""), ParseError);
}

TEST(Judge, ParseScoreMatchesOracle) {
  Rng rng(5);
  const std::string alphabet = "0123456789 /:.ab-";
  int parsed = 0;
  for (int i = 0; i < 5000; ++i) {
    std::string s;
    const auto len = rng.below(12);
    for (std::uint64_t k = 0; k < len; ++k) s.push_back(alphabet[rng.below(alphabet.size())]);
    const auto expected = oracle_score(s);
    if (expected) {
      ++parsed;
      EXPECT_EQ(parse_score(s), *expected) << s;
    } else {
      EXPECT_THROW(parse_score(s), ParseError) << s;
    }
  }
  EXPECT_GT(parsed, 500);
}

TEST(Judge, PromptCarriesAnchorsAndFields) {
  const std::string p = render_judge_prompt("Q {answer}", "REF", "ANS");
  for (const char* anchor :
       {"Score 1: The answer is completely unrelated to the reference.",
        "Score 3: The answer has minor relevance but does not align with the reference.",
        "Score 5: The answer has moderate relevance but contains inaccuracies.",
        "Score 7: The answer aligns with the reference but has minor omissions.",
        "Score 10: The answer is completely accurate and aligns perfectly with the reference."}) {
    EXPECT_NE(p.find(anchor), std::string::npos) << anchor;
  }
  EXPECT_NE(p.find("[Question]\nQ {answer}\n\n[Reference]\nREF\n\n[Answer]\nANS"), std::string::npos);
}

TEST(Judge, SingleReply) {
  StubServer s([](const nlohmann::json&, int) { return StubReply{200, completion_body("7")}; });
  ChatClient client;
  const JudgeOutcome o = judge_score("a", "b", "q", judge_for(s), client);
  EXPECT_EQ(o.score, 7);
  EXPECT_EQ(o.raw, "7");
  EXPECT_EQ(s.request_count(), 1);
  EXPECT_EQ(s.requests()[0]["max_tokens"], 16);
}

TEST(Judge, ReasksOnce) {
  StubServer s([](const nlohmann::json&, int i) {
    return StubReply{200, completion_body(i == 0 ? "Looks great!" : "9")};
  });
  ChatClient client;
  const JudgeOutcome o = judge_score("a", "b", "q", judge_for(s), client);
  EXPECT_EQ(o.score, 9);
  EXPECT_EQ(o.raw, "Looks great!\n---\n9");
  ASSERT_EQ(s.request_count(), 2);
  const auto msgs = s.requests()[1]["messages"];
  ASSERT_EQ(msgs.size(), 3u);
  EXPECT_EQ(msgs[1]["role"], "assistant");
  EXPECT_EQ(msgs[2]["content"], "Reply with only a single integer from 1 to 10.");
}

TEST(Judge, UnparseableAfterReask) {
  StubServer s([](const nlohmann::json&, int) { return StubReply{200, completion_body("eleven")}; });
  ChatClient client;
  try {
    judge_score("a", "b", "q", judge_for(s), client);
    FAIL();
  } catch (const JudgeParseError& e) {
    EXPECT_EQ(e.raw(), "eleven\n---\neleven");
  }
  EXPECT_EQ(s.request_count(), 2);
  EXPECT_THROW(judge_score("a", "", "q", judge_for(s), client), InvalidArgument);
}
