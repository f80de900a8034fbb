#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace sparselab {

using Rng = std::mt19937_64;

/// Independent, reproducible stream derived from a run seed and stream tags
/// (e.g. {seed, kStreamData, epoch}).
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (std::uint64_t t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq full(words.begin(), words.end());
  return Rng(full);
}

// Stream tags used across the library.
inline constexpr std::uint64_t kStreamMask = 1;
inline constexpr std::uint64_t kStreamInit = 2;
inline constexpr std::uint64_t kStreamData = 3;
inline constexpr std::uint64_t kStreamDst = 4;
inline constexpr std::uint64_t kStreamProbe = 5;
inline constexpr std::uint64_t kStreamSynthetic = 6;

}  // namespace sparselab
