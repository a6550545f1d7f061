#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace chopil {

// splitmix64 step; used to derive independent stream seeds from a base seed
// plus structural tags (episode index, batch index, ...).
inline std::uint64_t seed_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

template <typename... Tags>
std::uint64_t seed_mix(std::uint64_t x, std::uint64_t tag, Tags... rest) {
  return seed_mix(seed_mix(x) ^ tag, rest...);
}

// Deterministic RNG with explicitly specified distributions. std::*_distribution
// output is implementation-defined, so sampling is spelled out here to keep
// artifacts byte-reproducible across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n), n >= 1; rejection sampling, unbiased
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return v % n;
  }

  // standard normal via Box-Muller (both values used)
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace chopil
