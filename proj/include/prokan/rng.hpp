#pragma once

#include <cstdint>
#include <random>

namespace prokan {

// Independent generator streams derived from one run seed.
enum class RngStream : std::uint32_t { kInit = 1, kShuffle = 2, kSampling = 3, kSplit = 4 };

inline std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace prokan
