#pragma once

// Splittable deterministic randomness. Every sampled quantity is drawn from a
// stream derived from (master seed, sample index); distributions are generated
// by explicit formulas so byte-identical reruns do not depend on libstdc++
// internals.

#include <cmath>
#include <cstdint>
#include <random>

namespace specmult {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t sample_index)
      : engine_(splitmix64(splitmix64(master_seed) ^ splitmix64(sample_index + 0x51ed2701ULL))) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0,1) with 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * next_unit(); }

  // Box-Muller, one value per call (the spare is discarded to keep the stream
  // layout independent of call parity).
  double gaussian(double mean, double sigma) {
    double u1 = next_unit();
    double u2 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

// ---------- low-discrepancy grid ----------

// Van der Corput radical inverse.
inline double radical_inverse(std::uint64_t n, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base);
  double f = inv;
  double x = 0.0;
  while (n > 0) {
    x += static_cast<double>(n % base) * f;
    n /= base;
    f *= inv;
  }
  return x;
}

// k-th Halton point (bases 2 and 3) mapped into the rectangle
// [re_lo, re_hi] x [im_lo, im_hi]; k starts at 1.
inline std::pair<double, double> halton_rect(std::uint64_t k, double re_lo, double re_hi,
                                             double im_lo, double im_hi) {
  const double u = radical_inverse(k, 2);
  const double v = radical_inverse(k, 3);
  return {re_lo + (re_hi - re_lo) * u, im_lo + (im_hi - im_lo) * v};
}

}  // namespace specmult
