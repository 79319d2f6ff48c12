#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ovmine {

/// SplitMix64 step; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives a substream seed from a root seed, a stream name, and up to two
/// indices. Every random draw in the pipeline flows from one root seed
/// through named streams, so adding a consumer never perturbs the others.
inline std::uint64_t substream_seed(std::uint64_t root, std::string_view name,
                                    std::uint64_t index = 0,
                                    std::uint64_t index2 = 0) {
  std::uint64_t state = root ^ fnv1a(name);
  std::uint64_t a = splitmix64(state);
  state ^= index * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL;
  std::uint64_t b = splitmix64(state);
  state ^= index2 * 0xd1342543de82ef95ULL + 1;
  std::uint64_t c = splitmix64(state);
  return a ^ (b + 0x9e3779b97f4a7c15ULL) ^ (c << 1);
}

inline std::mt19937_64 make_stream(std::uint64_t root, std::string_view name,
                                   std::uint64_t index = 0,
                                   std::uint64_t index2 = 0) {
  return std::mt19937_64(substream_seed(root, name, index, index2));
}

}  // namespace ovmine
