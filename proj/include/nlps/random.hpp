#pragma once

#include <cstdint>
#include <random>

namespace nlps {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to turn (master seed, stream id) pairs into
// statistically independent engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

// Stream ids for the substreams a single trial draws from.
namespace stream {
inline constexpr std::uint64_t environment = 1;
inline constexpr std::uint64_t policy = 2;
inline constexpr std::uint64_t bootstrap = 3;
}  // namespace stream

// Standard normal redrawn until |x| <= bound.
inline double truncated_normal(Rng& rng, double bound) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double x = normal(rng);
  while (x > bound || x < -bound) x = normal(rng);
  return x;
}

}  // namespace nlps
