#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace pausebench {

// Hex-encoded SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// Standard (RFC 4648) base64 with padding.
std::string base64_encode(std::string_view bytes);
// Returns false on malformed input.
bool base64_decode(std::string_view text, std::string& out);

bool is_valid_utf8(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// UTC timestamp, ISO-8601 with millisecond precision ("2024-05-01T12:00:00.123Z").
std::string utc_timestamp();

// Portable seeded generator: mt19937_64 output is specified by the standard,
// the distributions in <random> are not, so draws are derived by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform01();
  double uniform(double lo, double hi);
  // Uniform integer in [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Derives a child seed from a parent seed and a label (first 8 bytes of SHA-256).
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

}  // namespace pausebench
