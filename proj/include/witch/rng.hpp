#pragma once

#include <cmath>
#include <cstdint>

namespace witch {

// Splittable counter-style generator built on the splitmix64 finalizer.
// Substreams are derived by hashing (master seed, stream ids); identical
// ids always yield the identical sample sequence, so batch order and the
// degree of parallelism never change results.
struct RngStream {
  std::uint64_t state = 0x9e3779b97f4a7c15ull;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static RngStream seeded(std::uint64_t seed) {
    RngStream r;
    r.state = mix(seed + 0x9e3779b97f4a7c15ull);
    return r;
  }

  // Derive an independent substream from up to three id words.
  static RngStream derive(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = mix(master + 0x9e3779b97f4a7c15ull);
    h = mix(h ^ (a + 0xbf58476d1ce4e5b9ull));
    h = mix(h ^ (b + 0x94d049bb133111ebull));
    h = mix(h ^ (c + 0x2545f4914f6cdd1dull));
    RngStream r;
    r.state = h;
    return r;
  }

  std::uint64_t next_u64() {
    state += 0x9e3779b97f4a7c15ull;
    return mix(state);
  }

  // Uniform in [0,1) with 53 random bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller; the sine branch is discarded to keep the stream position
  // a pure function of the draw count.
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    return n == 0 ? 0 : next_u64() % n;
  }
};

}  // namespace witch
