#ifndef SLOWBOND_RNG_HPP
#define SLOWBOND_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace slowbond {

/// One step of the SplitMix64 mixer.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of replica `index` under master seed `master`.
///
/// This is the index-th output of the SplitMix64 sequence started at `master`,
/// so adding replicas never changes the seeds of existing ones.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master + index * 0x9E3779B97F4A7C15ULL);
}

/// Random stream used throughout. The variate transforms are written out by hand
/// so that streams are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on (0, 1), never returns 0 or 1.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Lemire's method with rejection.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t x = engine_();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        x = engine_();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  bool coin() { return (engine_() >> 63) != 0; }

  /// Standard normal, Box-Muller with both outputs used.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double r = std::sqrt(-2.0 * std::log(uniform()));
    double th = 2.0 * M_PI * uniform();
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace slowbond

#endif
