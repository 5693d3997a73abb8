#include "pausebench/haystack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pausebench/error.hpp"

namespace pausebench {

namespace {

constexpr std::size_t kMinTargetTokens = 64;
constexpr std::string_view kParagraphSeparator = "\n\n";

std::string_view rtrim(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\n' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::string join_paragraphs(const std::vector<Paragraph>& paragraphs) {
  std::string out;
  for (const Paragraph& p : paragraphs) {
    if (!out.empty()) out.append(kParagraphSeparator);
    out.append(p.text);
  }
  return out;
}

// Longest sentence-aligned prefix of `paragraph` that fits the budget.
Paragraph sentence_fallback(const Paragraph& paragraph, std::size_t target_tokens,
                            const Tokenizer& tokenizer) {
  std::string best;
  for (const Sentence& s : split_sentences(paragraph.text)) {
    std::string_view candidate = rtrim(std::string_view(paragraph.text).substr(0, s.offset + s.length));
    if (tokenizer.count_tokens(candidate) > target_tokens) break;
    best.assign(candidate);
  }
  if (best.empty()) {
    throw InvalidArgument("target of " + std::to_string(target_tokens) +
                          " tokens is too small to fit one sentence");
  }
  return {std::move(best), paragraph.doc_id, paragraph.index};
}

struct Boundary {
  std::size_t offset;
  double estimated_depth;
};

// Sentence starts of every paragraph plus the end of the text, with a
// depth estimate from a single encode of the whole haystack.
std::vector<Boundary> sentence_boundaries(const Haystack& haystack, const std::string& text,
                                          const Tokenizer& tokenizer) {
  std::vector<std::size_t> offsets;
  std::size_t para_offset = 0;
  for (const Paragraph& p : haystack.paragraphs) {
    for (const Sentence& s : split_sentences(p.text)) offsets.push_back(para_offset + s.offset);
    para_offset += p.text.size() + kParagraphSeparator.size();
  }
  offsets.push_back(text.size());

  // token_starts[k] = byte offset where token k begins.
  std::vector<std::size_t> token_starts;
  std::size_t pos = 0;
  for (std::size_t len : tokenizer.token_byte_lengths(text)) {
    token_starts.push_back(pos);
    pos += len;
  }
  const double total = static_cast<double>(token_starts.size());

  std::vector<Boundary> out;
  out.reserve(offsets.size());
  for (std::size_t off : offsets) {
    auto before = std::lower_bound(token_starts.begin(), token_starts.end(), off) - token_starts.begin();
    out.push_back({off, total == 0 ? 0.0 : 100.0 * static_cast<double>(before) / total});
  }
  return out;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t count = 0;
  for (std::size_t pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + 1)) {
    ++count;
  }
  return count;
}

}  // namespace

std::string Haystack::text() const { return join_paragraphs(paragraphs); }

Haystack build_haystack(const Corpus& corpus, std::size_t target_tokens, const Tokenizer& tokenizer,
                        std::uint64_t seed, DocumentOrder order) {
  if (target_tokens < kMinTargetTokens) {
    throw InvalidArgument("target_tokens must be at least " + std::to_string(kMinTargetTokens) +
                          ", got " + std::to_string(target_tokens));
  }
  if (corpus.documents.empty()) throw InvalidArgument("corpus is empty");

  std::vector<std::size_t> doc_order(corpus.documents.size());
  std::iota(doc_order.begin(), doc_order.end(), 0);
  if (order == DocumentOrder::shuffled) {
    Rng rng(seed);
    rng.shuffle(doc_order);
  }

  std::vector<std::vector<Paragraph>> doc_paragraphs;
  for (std::size_t d : doc_order) {
    doc_paragraphs.push_back(split_paragraphs(corpus.documents[d].text, corpus.documents[d].doc_id));
  }

  const std::size_t sep_tokens = tokenizer.count_tokens(kParagraphSeparator);
  Haystack h;
  h.tokenizer_name = tokenizer.name();

  // Approximate accumulation; the exact count is settled below.
  std::size_t running = 0;
  bool full = false;
  while (!full) {
    for (const auto& paragraphs : doc_paragraphs) {
      for (const Paragraph& p : paragraphs) {
        std::size_t cost = tokenizer.count_tokens(p.text) + (h.paragraphs.empty() ? 0 : sep_tokens);
        if (running + cost > target_tokens) {
          full = true;
          break;
        }
        running += cost;
        h.paragraphs.push_back(p);
      }
      if (full) break;
    }
  }

  h.token_count = tokenizer.count_tokens(h.text());
  while (h.token_count > target_tokens && !h.paragraphs.empty()) {
    h.paragraphs.pop_back();
    h.token_count = tokenizer.count_tokens(h.text());
  }
  if (h.paragraphs.empty()) {
    h.paragraphs.push_back(sentence_fallback(doc_paragraphs.front().front(), target_tokens, tokenizer));
    h.token_count = tokenizer.count_tokens(h.paragraphs.front().text);
  }
  return h;
}

std::vector<double> depth_grid(int n) {
  if (n < 2) throw InvalidArgument("depth grid needs at least 2 points, got " + std::to_string(n));
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = 100.0 * i / (n - 1);
  out.front() = 0.0;
  out.back() = 100.0;
  return out;
}

PlacedContext place_needles_at(const Haystack& haystack, const std::vector<NeedleSpec>& needles,
                               const std::vector<double>& depths_pct, const Tokenizer& tokenizer) {
  if (needles.size() != depths_pct.size()) {
    throw InvalidArgument("need exactly one depth per needle");
  }
  if (needles.empty()) throw InvalidArgument("no needles to place");
  const std::string text = haystack.text();
  if (text.empty()) throw InvalidArgument("haystack is empty");
  for (std::size_t i = 0; i < needles.size(); ++i) {
    const std::string& n = needles[i].needle;
    if (n.empty()) throw InvalidArgument("needle text is empty");
    if (depths_pct[i] < 0.0 || depths_pct[i] > 100.0 || std::isnan(depths_pct[i])) {
      throw InvalidArgument("depth must lie in [0, 100], got " + std::to_string(depths_pct[i]));
    }
    if (text.find(n) != std::string::npos) {
      throw InvalidArgument("needle already occurs in the haystack: " + n);
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (needles[j].needle == n) throw InvalidArgument("duplicate needle text: " + n);
    }
  }

  const std::vector<Boundary> boundaries = sentence_boundaries(haystack, text, tokenizer);

  struct Choice {
    std::size_t needle;
    std::size_t offset;
    double target;
  };
  std::vector<Choice> choices;
  for (std::size_t i = 0; i < needles.size(); ++i) {
    const double target = depths_pct[i];
    const Boundary* best = &boundaries.front();
    for (const Boundary& b : boundaries) {
      if (std::abs(b.estimated_depth - target) < std::abs(best->estimated_depth - target)) best = &b;
    }
    choices.push_back({i, best->offset, target});
  }
  std::stable_sort(choices.begin(), choices.end(), [](const Choice& a, const Choice& b) {
    if (a.offset != b.offset) return a.offset < b.offset;
    return a.target < b.target;
  });

  PlacedContext placed;
  placed.needle_spans.resize(needles.size());
  placed.inserted_spans.resize(needles.size());
  placed.achieved_depths_pct.resize(needles.size());
  placed.target_depths_pct = depths_pct;

  const double total = static_cast<double>(haystack.token_count);
  std::size_t copied = 0;
  for (const Choice& c : choices) {
    placed.text.append(text, copied, c.offset - copied);
    copied = c.offset;
    const std::string& needle = needles[c.needle].needle;
    const std::size_t insert_at = placed.text.size();
    if (c.offset == text.size()) {
      placed.text.push_back(' ');
      placed.needle_spans[c.needle] = {placed.text.size(), needle.size()};
      placed.text.append(needle);
    } else {
      placed.needle_spans[c.needle] = {placed.text.size(), needle.size()};
      placed.text.append(needle);
      placed.text.push_back(' ');
    }
    placed.inserted_spans[c.needle] = {insert_at, placed.text.size() - insert_at};
    const double prefix = static_cast<double>(tokenizer.count_tokens(std::string_view(text).substr(0, c.offset)));
    placed.achieved_depths_pct[c.needle] = total == 0 ? 0.0 : std::min(100.0, 100.0 * prefix / total);
  }
  placed.text.append(text, copied, std::string::npos);

  for (const NeedleSpec& n : needles) {
    if (count_occurrences(placed.text, n.needle) != 1) {
      throw InvalidArgument("needle does not occur exactly once after placement: " + n.needle);
    }
  }
  return placed;
}

PlacedContext place_needle(const Haystack& haystack, const NeedleSpec& needle, double depth_pct,
                           const Tokenizer& tokenizer) {
  return place_needles_at(haystack, {needle}, {depth_pct}, tokenizer);
}

PlacedContext place_needles(const Haystack& haystack, const std::vector<NeedleSpec>& needles, Rng& rng,
                            const Tokenizer& tokenizer) {
  constexpr double kLo = 5.0;
  constexpr double kHi = 95.0;
  constexpr double kMinGap = 10.0;
  if (needles.empty() || needles.size() > 5) {
    throw InvalidArgument("multi-needle placement takes 1 to 5 needles, got " +
                          std::to_string(needles.size()));
  }
  for (std::size_t i = 0; i < needles.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (needles[i].needle == needles[j].needle) {
        throw InvalidArgument("duplicate needle text: " + needles[i].needle);
      }
    }
  }

  std::vector<double> depths(needles.size());
  for (;;) {
    for (double& d : depths) d = rng.uniform(kLo, kHi);
    std::sort(depths.begin(), depths.end());
    bool separated = true;
    for (std::size_t i = 1; i < depths.size(); ++i) {
      if (depths[i] - depths[i - 1] < kMinGap) separated = false;
    }
    if (separated) break;
  }
  return place_needles_at(haystack, needles, depths, tokenizer);
}

std::string remove_needles(const PlacedContext& placed) {
  std::vector<Span> spans = placed.inserted_spans;
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.offset < b.offset; });
  std::string out;
  std::size_t copied = 0;
  for (const Span& s : spans) {
    out.append(placed.text, copied, s.offset - copied);
    copied = s.offset + s.length;
  }
  out.append(placed.text, copied, std::string::npos);
  return out;
}

std::vector<NeedleSpec> load_needles(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw ParseError(path.string() + ": expected a JSON array of needles");
  std::vector<NeedleSpec> out;
  for (const auto& item : j) {
    try {
      out.push_back({item.at("needle").get<std::string>(), item.at("question").get<std::string>(),
                     item.at("reference_answer").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": needle " + std::to_string(out.size()) + ": " + e.what());
    }
    if (out.back().needle.empty()) {
      throw ParseError(path.string() + ": needle " + std::to_string(out.size() - 1) + " is empty");
    }
  }
  return out;
}

}  // namespace pausebench
