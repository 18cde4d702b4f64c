#ifndef SPAG_RNG_HPP
#define SPAG_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace spag {

// Seeded generator with platform-independent draws.  std::mt19937_64 has a
// pinned bit stream, but the standard distribution adaptors do not, so the
// uniform and categorical draws are implemented by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  // Uniform over {0, ..., n-1} by inverse CDF (not modulo; keeps the
  // mapping identical everywhere and bias below 2^-53).
  int uniform_int(int n);

  // Index sampled proportionally to weights (nonnegative, not necessarily
  // normalized).  Walks the weights in index order, so results are
  // reproducible across platforms.  A zero total yields index 0.
  int categorical(const std::vector<double>& weights);

 private:
  std::mt19937_64 eng_;
};

}  // namespace spag

#endif  // SPAG_RNG_HPP
