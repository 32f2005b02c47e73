#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <vector>

namespace feederlab {

// Deterministic RNG with hand-rolled distributions. std::* distributions are
// implementation-defined, which would break the byte-identical-output
// contract across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix(seed)) {
    if (state_ == 0) state_ = 0x9e3779b97f4a7c15ULL;
  }

  // Derives an independent stream, e.g. one per feeder.
  Rng fork(std::uint64_t stream) const {
    return Rng(state_ ^ splitmix(stream + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t next_u64() {
    // xorshift64*
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dULL;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  bool bernoulli(double p) { return uniform01() < p; }

  // Box-Muller; one fresh pair per call, no cached spare.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Multiplicative noise factor with mean 1.
  double lognormal_unit(double sigma) {
    if (sigma <= 0.0) return 1.0;
    return std::exp(normal(-0.5 * sigma * sigma, sigma));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t state_;
};

}  // namespace feederlab
