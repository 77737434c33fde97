#pragma once

#include <array>
#include <cstdint>

namespace catmc {

// xoshiro256** seeded through splitmix64. The generator and the derived
// distributions below are fixed so that a seed reproduces the same stream on
// every platform; std::*_distribution gives no such guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Standard normal by the Marsaglia polar method.
  double normal();

  // Draws k with probability proportional to probs[k] by inverse CDF.
  template <typename Probs>
  int categorical(const Probs& probs) {
    const double u = uniform();
    double acc = 0.0;
    const int n = static_cast<int>(probs.size());
    int last_positive = -1;
    for (int k = 0; k < n; ++k) {
      if (probs[k] <= 0.0) continue;
      last_positive = k;
      acc += probs[k];
      if (u < acc) return k;
    }
    // Rounding left the cumulative sum just below 1.
    return last_positive;
  }

 private:
  std::array<std::uint64_t, 4> s_{};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

// Independent stream seed for a (base seed, stream tag) pair.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

}  // namespace catmc
