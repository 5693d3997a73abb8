#include "pausebench/token.hpp"

#include <charconv>
#include <queue>

#include "pausebench/error.hpp"
#include "pausebench/util.hpp"

namespace pausebench {

namespace {

constexpr TokenId kNoRank = static_cast<TokenId>(-1);

struct Node {
  std::size_t start;
  std::size_t end;
  std::size_t prev;
  std::size_t next;
  std::uint32_t version;
  TokenId id;
};

struct Candidate {
  TokenId rank;
  std::size_t left;
  std::size_t right;
  std::uint32_t left_version;
  std::uint32_t right_version;

  // Min-heap on (rank, position); node index order equals byte order.
  bool operator>(const Candidate& o) const {
    if (rank != o.rank) return rank > o.rank;
    return left > o.left;
  }
};

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> ranks, std::string name)
    : ranks_(std::move(ranks)), name_(std::move(name)) {
  lookup_.reserve(ranks_.size());
  for (TokenId i = 0; i < ranks_.size(); ++i) {
    if (ranks_[i].empty()) throw ParseError("empty token bytes at rank " + std::to_string(i));
    auto [it, inserted] = lookup_.emplace(ranks_[i], i);
    if (!inserted) {
      throw ParseError("duplicate token bytes at ranks " + std::to_string(it->second) + " and " +
                       std::to_string(i));
    }
  }
  for (int b = 0; b < 256; ++b) {
    auto it = lookup_.find(std::string(1, static_cast<char>(b)));
    if (it == lookup_.end()) throw ParseError("vocabulary has no entry for byte " + std::to_string(b));
    byte_rank_[b] = it->second;
  }
}

void Tokenizer::add_special(std::string text, TokenId id) {
  if (id < ranks_.size()) {
    throw InvalidArgument("special token id " + std::to_string(id) + " collides with a base rank");
  }
  if (special_bytes_.count(id)) {
    throw InvalidArgument("special token id " + std::to_string(id) + " already assigned");
  }
  if (specials_.count(text)) throw InvalidArgument("special token " + text + " already registered");
  special_bytes_.emplace(id, text);
  specials_.emplace(std::move(text), id);
}

std::int64_t Tokenizer::rank_of(std::string_view bytes) const {
  auto it = lookup_.find(std::string(bytes));
  return it == lookup_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::vector<TokenId> Tokenizer::merge(std::string_view text) const {
  const std::size_t n = text.size();
  if (n == 0) return {};

  std::vector<Node> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i] = Node{i, i + 1, i == 0 ? kNone : i - 1, i + 1 == n ? kNone : i + 1, 0,
                    byte_rank_[static_cast<unsigned char>(text[i])]};
  }

  std::string scratch;
  auto pair_rank = [&](std::size_t left, std::size_t right) -> TokenId {
    scratch.assign(text.data() + nodes[left].start, nodes[right].end - nodes[left].start);
    auto it = lookup_.find(scratch);
    return it == lookup_.end() ? kNoRank : it->second;
  };

  std::vector<Candidate> initial;
  initial.reserve(n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    TokenId r = pair_rank(i, i + 1);
    if (r != kNoRank) initial.push_back({r, i, i + 1, 0, 0});
  }
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap(std::greater<>{},
                                                                            std::move(initial));

  auto push = [&](std::size_t left, std::size_t right) {
    if (left == kNone || right == kNone) return;
    TokenId r = pair_rank(left, right);
    if (r != kNoRank) heap.push({r, left, right, nodes[left].version, nodes[right].version});
  };

  std::vector<bool> dead(n, false);
  while (!heap.empty()) {
    Candidate c = heap.top();
    heap.pop();
    if (dead[c.left] || dead[c.right]) continue;
    Node& l = nodes[c.left];
    Node& r = nodes[c.right];
    if (l.version != c.left_version || r.version != c.right_version || l.next != c.right) continue;

    l.end = r.end;
    l.id = c.rank;
    l.next = r.next;
    ++l.version;
    if (r.next != kNone) nodes[r.next].prev = c.left;
    dead[c.right] = true;

    push(l.prev, c.left);
    push(c.left, l.next);
  }

  std::vector<TokenId> out;
  for (std::size_t i = 0; i != kNone; i = nodes[i].next) out.push_back(nodes[i].id);
  return out;
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const { return merge(text); }

std::size_t Tokenizer::count_tokens(std::string_view text) const { return merge(text).size(); }

std::vector<std::size_t> Tokenizer::token_byte_lengths(std::string_view text) const {
  std::vector<std::size_t> lengths;
  for (TokenId id : merge(text)) lengths.push_back(ranks_[id].size());
  return lengths;
}

std::string_view Tokenizer::token_bytes(TokenId id) const {
  if (id < ranks_.size()) return ranks_[id];
  auto it = special_bytes_.find(id);
  if (it == special_bytes_.end()) throw InvalidArgument("unknown token id " + std::to_string(id));
  return it->second;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) out.append(token_bytes(id));
  return out;
}

Tokenizer parse_vocab(std::string_view contents, std::string name) {
  struct Entry {
    std::string bytes;
    std::size_t line;
  };
  std::vector<Entry> by_rank;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t eol = contents.find('\n', pos);
    if (eol == std::string_view::npos) eol = contents.size();
    std::string_view line = contents.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    auto fail = [&](const std::string& why) {
      return ParseError("vocab line " + std::to_string(line_no) + ": " + why);
    };
    std::size_t space = line.find(' ');
    if (space == std::string_view::npos || line.find(' ', space + 1) != std::string_view::npos) {
      throw fail("expected '<base64> <rank>'");
    }
    std::string bytes;
    if (!base64_decode(line.substr(0, space), bytes)) throw fail("invalid base64");
    std::string_view rank_text = line.substr(space + 1);
    std::size_t rank = 0;
    auto [ptr, ec] = std::from_chars(rank_text.data(), rank_text.data() + rank_text.size(), rank);
    if (ec != std::errc() || ptr != rank_text.data() + rank_text.size()) {
      throw fail("invalid rank '" + std::string(rank_text) + "'");
    }
    if (rank >= by_rank.size()) by_rank.resize(rank + 1);
    if (by_rank[rank].line != 0) {
      throw ParseError("duplicate rank " + std::to_string(rank) + " on lines " +
                       std::to_string(by_rank[rank].line) + " and " + std::to_string(line_no));
    }
    by_rank[rank] = Entry{std::move(bytes), line_no};
  }

  std::vector<std::string> ranks;
  ranks.reserve(by_rank.size());
  for (std::size_t r = 0; r < by_rank.size(); ++r) {
    if (by_rank[r].line == 0) throw ParseError("ranks not contiguous: rank " + std::to_string(r) + " missing");
    ranks.push_back(std::move(by_rank[r].bytes));
  }
  return Tokenizer(std::move(ranks), std::move(name));
}

Tokenizer load_vocab(const std::filesystem::path& path) {
  return parse_vocab(read_file(path), path.stem().string());
}

}  // namespace pausebench
