#pragma once

// Seeded 64-bit mixing primitives. Everything random in this codebase
// (bucket hashes, signs, permutations, parameter init, synthetic data)
// is derived from mix64 so runs are reproducible from a single seed.

#include <cmath>
#include <cstdint>

namespace rps {

struct HashSeed {
  std::uint64_t value = 0;
};

// Avalanche mixer keyed by (seed, x): splitmix64 finalizer over the input
// offset by the golden ratio, with the seed spread by an odd multiplier
// before injection. Pure integer function, identical on every platform.
constexpr std::uint64_t mix64(std::uint64_t seed, std::uint64_t x) noexcept {
  std::uint64_t z = (x + 0x9e3779b97f4a7c15ULL) ^
                    (seed * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t mix64(HashSeed seed, std::uint64_t x) noexcept {
  return mix64(seed.value, x);
}

// Stream ids separate the roles a single user seed plays. Subseed for a
// role r is mix64(seed, r); streams never share outputs.
namespace stream {
constexpr std::uint64_t bucket = 1;   // bucket hash h / fold offsets u
constexpr std::uint64_t sign = 2;     // sign function g
constexpr std::uint64_t permute = 3;  // index permutation
constexpr std::uint64_t psi_init = 4; // compressed array init
constexpr std::uint64_t score = 5;    // random pruning scores
constexpr std::uint64_t data = 6;     // synthetic datasets
constexpr std::uint64_t shuffle = 7;  // minibatch order
constexpr std::uint64_t subset = 8;   // pruning-style coordinate subsets
constexpr std::uint64_t init = 9;     // dense weight init
constexpr std::uint64_t eval = 10;    // held-out evaluation data
} // namespace stream

constexpr std::uint64_t subseed(HashSeed seed, std::uint64_t stream_id) noexcept {
  return mix64(seed, stream_id);
}

// Lemire multiply-shift reduction of a mixed value onto [0, m).
constexpr std::uint64_t reduce(std::uint64_t h, std::uint64_t m) noexcept {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(h) * static_cast<unsigned __int128>(m)) >> 64);
}

// One bit of the mixed value as a sign in {-1, +1}.
constexpr int sign_hash(std::uint64_t sign_seed, std::uint64_t i) noexcept {
  return (mix64(sign_seed, i) >> 63) ? -1 : 1;
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t h) noexcept {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Counter-based generator: draw k is a pure function of (seed, k), so
// streams can be replayed or split without shared state.
class Prng {
public:
  explicit Prng(std::uint64_t seed) : seed_(seed) {}
  explicit Prng(HashSeed seed, std::uint64_t stream_id)
      : seed_(subseed(seed, stream_id)) {}

  std::uint64_t next_u64() { return mix64(seed_, counter_++); }
  double next_unit() { return to_unit(next_u64()); }

  // Uniform in [0, bound).
  std::uint64_t next_below(std::uint64_t bound) { return reduce(next_u64(), bound); }

  // Box-Muller; u1 is nudged into (0, 1] so the log stays finite.
  double next_normal() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

} // namespace rps
