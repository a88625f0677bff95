#ifndef PSPIN_SEEDING_HPP
#define PSPIN_SEEDING_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pspin {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Derives a stream id from an ordered list of words. Order matters.
constexpr std::uint64_t derive_stream(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x243F6A8885A308D3ULL;
  for (std::uint64_t w : words) h = splitmix64(h ^ splitmix64(w));
  return h;
}

using Engine = std::mt19937_64;

inline constexpr const char* kGeneratorName = "mt19937_64 + std::normal_distribution<double>";

}  // namespace pspin

#endif  // PSPIN_SEEDING_HPP
