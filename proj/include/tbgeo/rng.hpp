#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tbg {

// Deterministic uniform RNG. mt19937_64 output is specified by the standard,
// and the (x >> 11) * 2^-53 mapping below is fixed arithmetic, so streams are
// reproducible across platforms and standard libraries (std::uniform_real_distribution
// is not: its algorithm is implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Uniform integer in [0, n) via rejection-free modulo of the full 64-bit
  // draw; bias is negligible for the small n used here but we mask anyway.
  int below(int n) { return static_cast<int>(eng_() % static_cast<uint64_t>(n)); }

 private:
  std::mt19937_64 eng_;
};

// FNV-1a, used to derive independent per-check seeds from a label so that
// adding or reordering checks never shifts another check's random stream.
inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace tbg
