#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace textrev {

inline constexpr const char* kVersion = "textrev 0.1.0";

// Error taxonomy. The CLI maps these onto exit codes:
// ConfigError -> 2, NumericError -> 3, partial suite failures -> 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VocabError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable seed derivation for independent sub-streams.
inline uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(a + 1)) ^ splitmix64(b + 0x51ed2701));
}

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

std::string hex_hash(uint64_t h);

}  // namespace textrev
