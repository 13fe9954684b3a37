#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace coaltree {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to mix tags/indices into stream seeds so that
// every (stage, slot) pair gets a statistically independent engine no matter
// how many streams were drawn before it.
inline std::uint64_t split_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace stream {
constexpr std::uint64_t prior = 1;
constexpr std::uint64_t diffusion = 2;
constexpr std::uint64_t smc_stage = 3;
constexpr std::uint64_t resample = 4;
constexpr std::uint64_t hyper = 5;
constexpr std::uint64_t alternate = 6;
constexpr std::uint64_t replicate = 7;
}  // namespace stream

// Derives a fresh engine from (master seed, stream tag, indices).  Streams are
// keyed by position in the schedule, never by how much randomness earlier
// steps consumed, so serial and parallel execution see identical draws.
inline Rng make_rng(std::uint64_t master, std::uint64_t tag, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
  std::uint64_t h = split_mix(master);
  h = split_mix(h ^ tag);
  h = split_mix(h ^ a);
  h = split_mix(h ^ b);
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(split_mix(h)),
                    static_cast<std::uint32_t>(split_mix(h) >> 32)};
  return Rng(seq);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t a = 0) {
  std::uint64_t h = split_mix(master);
  h = split_mix(h ^ tag);
  return split_mix(h ^ a);
}

inline double uniform01(Rng& rng) {
  // 53-bit mantissa draw in [0, 1); avoids distribution-object state.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double normal01(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

// Exponential with given rate via inversion (deterministic draw count of 1).
inline double exponential(Rng& rng, double rate) {
  double u = uniform01(rng);
  return -std::log1p(-u) / rate;
}

// Uniform integer in [0, n); rejection-free scaling is fine at our sizes.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return std::min<std::uint64_t>(n - 1, static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)));
}

}  // namespace coaltree
