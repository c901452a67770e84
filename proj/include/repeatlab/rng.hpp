#pragma once

// Deterministic, platform-independent random number generation. Every
// stochastic operation in the library takes an explicit 64-bit seed and runs
// on these generators only -- never on std::random_device, std::mt19937 or
// the std <random> distributions, whose outputs vary across standard library
// implementations.
//
// Contract (mirrored by the frozen reference data in the tests):
//   - splitmix64's output mixing function seeds everything.
//   - derive_stream(master, id) = mix(master + GOLDEN * (id + 1)), giving
//     decorrelated substreams for parallel-safe, order-independent use.
//   - Rng is xoshiro256++, state seeded by four successive splitmix64 outputs.
//   - uniform() = (next() >> 11) * 2^-53, in [0, 1).
//   - uniform_int(bound) uses modulo rejection: draw 64-bit words until
//     w >= (2^64 - bound) % bound, return w % bound.
//   - normal() is Box-Muller, consuming exactly two uniforms per pair and
//     caching the second value.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "repeatlab/errors.hpp"

namespace repeatlab {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer (mix of Stafford/MurmurHash3 constants).
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += kGolden;
    return splitmix64_mix(state_);
  }

 private:
  std::uint64_t state_;
};

// Decorrelated child seed for substream `stream_id` of `master`. Offsetting
// by id+1 keeps derive_stream(s, 0) distinct from splitmix64(s).next().
inline std::uint64_t derive_stream(std::uint64_t master, std::uint64_t stream_id) {
  return splitmix64_mix(master + kGolden * (stream_id + 1));
}

// xoshiro256++ (Blackman & Vigna), seeded via splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& word : state_) word = sm.next();
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound) without modulo bias.
  std::uint64_t uniform_int(std::uint64_t bound) {
    if (bound == 0) throw_args("uniform_int: bound must be positive");
    const std::uint64_t threshold = (0ull - bound) % bound;
    for (;;) {
      const std::uint64_t w = next_u64();
      if (w >= threshold) return w % bound;
    }
  }

  // Standard normal via Box-Muller. Each pair of uniforms yields two values;
  // the second is cached so draw order is exactly two uniforms per two calls.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    const double u2 = uniform();
    // Guard log(0); the smallest representable draw keeps the tail finite.
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    have_cached_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates, swapping positions i and uniform_int(i+1) from the back.
  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace repeatlab
