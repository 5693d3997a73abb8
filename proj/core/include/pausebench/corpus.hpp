#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pausebench {

struct Document {
  std::string doc_id;  // file name
  std::string text;    // normalized
};

struct Corpus {
  std::vector<Document> documents;  // sorted by doc_id
  std::string source;
};

struct Paragraph {
  std::string text;
  std::string doc_id;
  std::size_t index = 0;
};

struct Sentence {
  std::string text;  // exact bytes of the span, trailing whitespace included
  std::size_t offset = 0;
  std::size_t length = 0;
};

// CRLF/CR -> LF, strips a UTF-8 BOM, right-trims every line, collapses runs
// of blank lines to one and trims leading/trailing blank lines. Joining
// split_paragraphs(text) with "\n\n" yields exactly this string.
std::string normalize_text(std::string_view text);

// Loads every regular file in `dir` whose name matches the fnmatch-style
// `glob`, in lexicographic order. Throws IoError on an empty match set and
// ParseError naming the file when it is not valid UTF-8.
Corpus load_corpus(const std::filesystem::path& dir, std::string_view glob = "*.txt");

// Blank-line-delimited blocks of the normalized text.
std::vector<Paragraph> split_paragraphs(std::string_view text, std::string_view doc_id = {});

// Rule-based sentence segmentation. A boundary follows '.', '!' or '?'
// (plus any closing quotes/brackets) when followed by whitespace and an
// uppercase letter, or by end of text. Known abbreviations never end a
// sentence. Spans are contiguous and cover the whole input.
std::vector<Sentence> split_sentences(std::string_view text);

}  // namespace pausebench
