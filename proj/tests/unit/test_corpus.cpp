#include <gtest/gtest.h>

#include <filesystem>

#include "pausebench/corpus.hpp"
#include "pausebench/error.hpp"
#include "pausebench/util.hpp"

using namespace pausebench;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = PAUSEBENCH_FIXTURES;

std::string join_sentences(const std::vector<Sentence>& ss) {
  std::string out;
  for (const Sentence& s : ss) out += s.text;
  return out;
}

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("pausebench_corpus_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Corpus, NormalizeText) {
  EXPECT_EQ(normalize_text("\xEF\xBB\xBFOne.  \r\nTwo.\r\n\r\n\r\n\r\nThree.\n\n"), "One.\nTwo.\n\nThree.");
  EXPECT_EQ(normalize_text("\n\n  \nA\rB\n"), "A\nB");
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_text(normalize_text("a\n\n\nb")), "a\n\nb");
}

TEST(Corpus, ParagraphsRejoinToNormalizedText) {
  const std::string raw = "First para.\nstill first.\n\n\n\nSecond.   \n \nThird.";
  const std::string norm = normalize_text(raw);
  const auto paras = split_paragraphs(norm, "doc");
  ASSERT_EQ(paras.size(), 3u);
  EXPECT_EQ(paras[0].text, "First para.\nstill first.");
  EXPECT_EQ(paras[2].index, 2u);
  EXPECT_EQ(paras[1].doc_id, "doc");
  std::string joined;
  for (const auto& p : paras) joined += (joined.empty() ? "" : "\n\n") + p.text;
  EXPECT_EQ(joined, norm);
}

TEST(Corpus, LoadFixtureCorpus) {
  const Corpus c = load_corpus(kFixtures + "/corpus");
  ASSERT_EQ(c.documents.size(), 3u);
  EXPECT_EQ(c.documents[0].doc_id, "01_workshops.txt");
  EXPECT_EQ(c.documents[2].doc_id, "03_notebooks.txt");
  for (const Document& d : c.documents) EXPECT_EQ(normalize_text(d.text), d.text);
  EXPECT_EQ(load_corpus(kFixtures + "/corpus", "02_*").documents.size(), 1u);
}

TEST(Corpus, LoadErrors) {
  EXPECT_THROW(load_corpus(kFixtures + "/nope"), IoError);
  EXPECT_THROW(load_corpus(kFixtures + "/corpus", "*.md"), IoError);
  const fs::path dir = scratch_dir("utf8");
  write_file(dir / "bad.txt", "ok \xff bytes");
  try {
    load_corpus(dir);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.txt"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Corpus, SentenceBoundaries) {
  const auto ss = split_sentences("Hello there. How are you? Fine! ok then.");
  ASSERT_EQ(ss.size(), 3u);
  EXPECT_EQ(ss[0].text, "Hello there. ");
  EXPECT_EQ(ss[1].text, "How are you? ");
  // Lowercase after the '!' does not start a new sentence.
  EXPECT_EQ(ss[2].text, "Fine! ok then.");
  EXPECT_EQ(ss[2].offset, 26u);
}

TEST(Corpus, AbbreviationsDoNotSplit) {
  const auto ss = split_sentences("We met Mr. Halvorsen and Dr. Okafor. Tools, e.g. Planes, were sharp. Done.");
  ASSERT_EQ(ss.size(), 3u);
  EXPECT_EQ(ss[0].text, "We met Mr. Halvorsen and Dr. Okafor. ");
  EXPECT_EQ(ss[1].text, "Tools, e.g. Planes, were sharp. ");
}

TEST(Corpus, ClosingQuotesStayWithSentence) {
  const auto ss = split_sentences("He said \"Stop.\" Then he left.");
  ASSERT_EQ(ss.size(), 2u);
  EXPECT_EQ(ss[0].text, "He said \"Stop.\" ");
}

TEST(Corpus, SentencesCoverFixtureParagraphs) {
  const Corpus c = load_corpus(kFixtures + "/corpus");
  for (const Document& d : c.documents) {
    for (const Paragraph& p : split_paragraphs(d.text, d.doc_id)) {
      const auto ss = split_sentences(p.text);
      ASSERT_FALSE(ss.empty());
      EXPECT_EQ(join_sentences(ss), p.text);
      std::size_t at = 0;
      for (const Sentence& s : ss) {
        EXPECT_EQ(s.offset, at);
        EXPECT_EQ(s.length, s.text.size());
        at += s.length;
      }
    }
  }
}

TEST(Corpus, NoTerminalPunctuationIsOneSentence) {
  const auto ss = split_sentences("no full stop here");
  ASSERT_EQ(ss.size(), 1u);
  EXPECT_TRUE(split_sentences("").empty());
}
