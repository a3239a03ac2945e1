#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ideotrace {

// Seeded random source with fully specified mappings on top of mt19937_64,
// so the same seed produces the same stream on every platform. The standard
// library distributions are implementation-defined and are not used here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1), 53 bits of precision.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound). bound must be positive.
  int uniform_int(int bound) {
    return static_cast<int>(gen_() % static_cast<std::uint64_t>(bound));
  }

  /// Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));  // 1-u1 in (0,1]
    return r * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates shuffle, one uniform_int per swap.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

/// Stateless mix of a base seed with a stream index, for deriving
/// independent child seeds (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ideotrace
