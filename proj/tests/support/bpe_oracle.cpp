#include "bpe_oracle.hpp"

#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace testsupport {

std::string decode_base64(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::string out;
  unsigned buffer = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = value(c);
    if (v < 0) throw std::runtime_error("bad base64");
    buffer = (buffer << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xff));
    }
  }
  return out;
}

BpeOracle::BpeOracle(const std::filesystem::path& rank_file) {
  std::ifstream in(rank_file);
  if (!in) throw std::runtime_error("cannot open " + rank_file.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string b64;
    std::uint32_t rank = 0;
    fields >> b64 >> rank;
    ranks_[decode_base64(b64)] = rank;
  }
}

std::vector<std::uint32_t> BpeOracle::encode(std::string_view text) const {
  std::vector<std::string> parts;
  for (char c : text) parts.emplace_back(1, c);
  for (;;) {
    std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
    std::size_t at = parts.size();
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      auto it = ranks_.find(parts[i] + parts[i + 1]);
      if (it != ranks_.end() && it->second < best) {
        best = it->second;
        at = i;
      }
    }
    if (at == parts.size()) break;
    parts[at] += parts[at + 1];
    parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(at) + 1);
  }
  std::vector<std::uint32_t> ids;
  for (const std::string& p : parts) ids.push_back(ranks_.at(p));
  return ids;
}

}  // namespace testsupport
