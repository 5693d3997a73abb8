#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pausebench/corpus.hpp"
#include "pausebench/token.hpp"
#include "pausebench/util.hpp"

namespace pausebench {

// The context before any needle or pause insertion.
struct Haystack {
  std::vector<Paragraph> paragraphs;
  std::size_t token_count = 0;
  std::string tokenizer_name;

  // Paragraphs joined with "\n\n".
  std::string text() const;
};

struct NeedleSpec {
  std::string needle;  // one self-contained sentence
  std::string question;
  std::string reference_answer;
};

struct Span {
  std::size_t offset = 0;
  std::size_t length = 0;
  bool operator==(const Span&) const = default;
};

struct PlacedContext {
  std::string text;
  std::vector<Span> needle_spans;     // exactly the needle bytes
  std::vector<Span> inserted_spans;   // needle plus its one-space separator
  std::vector<double> achieved_depths_pct;
  std::vector<double> target_depths_pct;
};

enum class DocumentOrder { corpus, shuffled };

// Appends paragraphs until the next one would exceed `target_tokens`. When
// the corpus runs out before the budget is reached it starts over from the
// first document. If the very first paragraph is already too long, the
// haystack is accumulated sentence by sentence instead.
Haystack build_haystack(const Corpus& corpus, std::size_t target_tokens,
                        const Tokenizer& tokenizer, std::uint64_t seed,
                        DocumentOrder order = DocumentOrder::corpus);

// n evenly spaced depths from 0 to 100 inclusive.
std::vector<double> depth_grid(int n);

// Inserts the needle at the sentence boundary whose token prefix is nearest
// to depth_pct% of the haystack. Rejects needles already present in the
// haystack.
PlacedContext place_needle(const Haystack& haystack, const NeedleSpec& needle,
                           double depth_pct, const Tokenizer& tokenizer);

// Three needles at depths drawn uniformly from [5, 95] with pairwise gaps of
// at least 10 points, placed in ascending depth order.
PlacedContext place_needles(const Haystack& haystack, const std::vector<NeedleSpec>& needles,
                            Rng& rng, const Tokenizer& tokenizer);

// Places needles at explicit depths (one per needle, any order).
PlacedContext place_needles_at(const Haystack& haystack, const std::vector<NeedleSpec>& needles,
                               const std::vector<double>& depths_pct,
                               const Tokenizer& tokenizer);

// Removes every inserted span; yields the original haystack text.
std::string remove_needles(const PlacedContext& placed);

// JSON array of {needle, question, reference_answer}.
std::vector<NeedleSpec> load_needles(const std::filesystem::path& path);

}  // namespace pausebench
