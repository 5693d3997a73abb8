#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pausebench {

using TokenId = std::uint32_t;

// Byte-level BPE tokenizer backed by a tiktoken-style rank table.
//
// Encoding starts from single bytes and repeatedly merges the adjacent pair
// whose concatenation has the lowest rank, leftmost first, until no adjacent
// pair is in the vocabulary. Immutable after construction.
class Tokenizer {
 public:
  // `ranks[i]` holds the bytes of token i. Throws ParseError if the table
  // violates byte-level completeness or contains duplicate byte strings.
  Tokenizer(std::vector<std::string> ranks, std::string name);

  // Registers a special token. Ids must not collide with base ranks or other
  // specials. Specials are never produced by encode().
  void add_special(std::string text, TokenId id);

  std::vector<TokenId> encode(std::string_view text) const;
  std::size_t count_tokens(std::string_view text) const;
  // Throws InvalidArgument naming the first unknown id.
  std::string decode(std::span<const TokenId> ids) const;

  // Byte length of each token in encode(text), in order.
  std::vector<std::size_t> token_byte_lengths(std::string_view text) const;

  // Bytes for a base or special id; throws InvalidArgument when unknown.
  std::string_view token_bytes(TokenId id) const;

  // Rank of a byte string, or -1 when it is not a base token.
  std::int64_t rank_of(std::string_view bytes) const;

  std::size_t vocab_size() const { return ranks_.size(); }
  const std::map<std::string, TokenId>& specials() const { return specials_; }
  const std::string& name() const { return name_; }

 private:
  std::vector<std::string> ranks_;
  std::unordered_map<std::string, TokenId> lookup_;
  std::map<std::string, TokenId> specials_;
  std::unordered_map<TokenId, std::string> special_bytes_;
  std::string name_;
  TokenId byte_rank_[256];

  std::vector<TokenId> merge(std::string_view text) const;
};

// Loads "<base64 token bytes> <decimal rank>" lines. Ranks must be unique
// and contiguous from 0 and cover every single byte. Errors carry 1-based
// line numbers.
Tokenizer load_vocab(const std::filesystem::path& path);
Tokenizer parse_vocab(std::string_view contents, std::string name);

}  // namespace pausebench
