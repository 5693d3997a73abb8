#include "pausebench/corpus.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <array>
#include <cctype>

#include "pausebench/error.hpp"
#include "pausebench/util.hpp"

namespace pausebench {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), is_space);
}

std::string_view rtrim(std::string_view s) {
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Splits on '\n' after CR normalization and BOM removal.
std::vector<std::string> normalized_lines(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<std::string> lines;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      lines.push_back(std::move(current));
      current.clear();
    } else if (c == '\n') {
      lines.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  lines.push_back(std::move(current));
  return lines;
}

// Paragraph blocks as lists of right-trimmed lines.
std::vector<std::string> paragraph_blocks(std::string_view text) {
  std::vector<std::string> blocks;
  std::string current;
  bool open = false;
  for (const std::string& raw : normalized_lines(text)) {
    if (is_blank(raw)) {
      if (open) blocks.push_back(std::move(current));
      current.clear();
      open = false;
      continue;
    }
    if (open) current.push_back('\n');
    current.append(rtrim(raw));
    open = true;
  }
  if (open) blocks.push_back(std::move(current));
  return blocks;
}

bool is_upper_ascii(char c) { return c >= 'A' && c <= 'Z'; }

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

constexpr std::array<std::string_view, 6> kAbbreviations = {"Mr.", "Dr.", "e.g.", "i.e.", "vs.", "etc."};

// True when the '.' at `dot` ends one of the known abbreviations.
bool ends_abbreviation(std::string_view text, std::size_t dot) {
  for (std::string_view abbr : kAbbreviations) {
    if (dot + 1 < abbr.size()) continue;
    std::size_t start = dot + 1 - abbr.size();
    if (text.substr(start, abbr.size()) != abbr) continue;
    // Must be a word on its own ("Dr." but not "Undr.").
    if (start == 0 || !std::isalpha(static_cast<unsigned char>(text[start - 1]))) return true;
  }
  return false;
}

}  // namespace

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const std::string& block : paragraph_blocks(text)) {
    if (!out.empty()) out.append("\n\n");
    out.append(block);
  }
  return out;
}

Corpus load_corpus(const std::filesystem::path& dir, std::string_view glob) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
  const std::string pattern(glob);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (fnmatch(pattern.c_str(), name.c_str(), 0) == 0) files.push_back(entry.path());
  }
  if (files.empty()) throw IoError("no files matching '" + pattern + "' in " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  Corpus corpus;
  corpus.source = dir.string();
  for (const fs::path& file : files) {
    std::string raw = read_file(file);
    if (!is_valid_utf8(raw)) throw ParseError("not valid UTF-8: " + file.filename().string());
    std::string text = normalize_text(raw);
    if (text.empty()) continue;
    corpus.documents.push_back({file.filename().string(), std::move(text)});
  }
  if (corpus.documents.empty()) throw IoError("every matching file in " + dir.string() + " is empty");
  return corpus;
}

std::vector<Paragraph> split_paragraphs(std::string_view text, std::string_view doc_id) {
  std::vector<Paragraph> out;
  for (std::string& block : paragraph_blocks(text)) {
    out.push_back({std::move(block), std::string(doc_id), out.size()});
  }
  return out;
}

std::vector<Sentence> split_sentences(std::string_view text) {
  std::vector<Sentence> out;
  std::size_t start = 0;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    while (end < n && (text[end] == '.' || text[end] == '!' || text[end] == '?')) ++end;
    while (end < n && is_closer(text[end])) ++end;
    if (c == '.' && end == i + 1 && ends_abbreviation(text, i)) {
      i = end;
      continue;
    }
    std::size_t next = end;
    while (next < n && is_space(text[next])) ++next;
    bool boundary = next == n || (next > end && is_upper_ascii(text[next]));
    if (boundary) {
      out.push_back({std::string(text.substr(start, next - start)), start, next - start});
      start = next;
    }
    i = end;
  }
  if (start < n) out.push_back({std::string(text.substr(start)), start, n - start});
  return out;
}

}  // namespace pausebench
