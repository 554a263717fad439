#pragma once

#include <cstdint>

namespace cobra {

// splitmix64 step. All randomness in the project flows through this so that
// runs are reproducible across platforms and standard libraries.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Unbiased integer in [0, n), n >= 1. Rejection sampling.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

 private:
  std::uint64_t state_;
};

// Stream keyed by (seed, a, b). Draws depend only on the key, never on how
// many other streams were consumed before this one, so concurrent or
// reordered evaluation cannot change results.
inline Rng keyed_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s = h ^ (a * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  h = splitmix64(s);
  s = h ^ (b * 0x9e3779b97f4a7c15ULL + 0x6a09e667f3bcc909ULL);
  splitmix64(s);
  return Rng(s);
}

}  // namespace cobra
