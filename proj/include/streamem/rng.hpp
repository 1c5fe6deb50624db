#pragma once

#include <cstdint>
#include <random>

namespace streamem {

// splitmix64 step; used only to spread seeds, never as the working generator.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic substream seed: adjacent (master, r) pairs land in unrelated
// parts of the seed space.
inline std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::uint64_t r) {
  std::uint64_t s = master_seed + 0x9E3779B97F4A7C15ull * (r + 1);
  const std::uint64_t a = splitmix64_next(s);
  const std::uint64_t b = splitmix64_next(s);
  return a ^ b;
}

inline std::mt19937_64 make_stream(std::uint64_t master_seed, std::uint64_t r) {
  return std::mt19937_64(derive_stream_seed(master_seed, r));
}

}  // namespace streamem
