#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace macp {

// All distributions are hand-rolled on top of std::mt19937_64 so that streams
// are bit-identical across standard libraries (std::*_distribution is
// implementation-defined). Identifier recorded in experiment metadata.
inline constexpr std::string_view kRngAlgorithm = "mt19937_64+boxmuller/1";

[[nodiscard]] inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Documented splitting rule: stream k of base seed s is seeded from
// splitmix64 applied k+1 times to s.
[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t s = base;
  std::uint64_t out = splitmix64(s);
  for (std::uint64_t i = 0; i < index; ++i) out = splitmix64(s);
  return out;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  [[nodiscard]] std::uint64_t next_u64() { return engine_(); }

  // [0,1) with 53 uniform bits.
  [[nodiscard]] double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  [[nodiscard]] bool bernoulli(double p) { return uniform() < p; }

  // Unbiased integer in [0, bound) via 128-bit rejection (Lemire).
  [[nodiscard]] std::uint64_t below(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  [[nodiscard]] std::uint8_t uniform_u8() { return static_cast<std::uint8_t>(below(256)); }

  // Box-Muller with cached second deviate.
  [[nodiscard]] double normal(double mean, double stddev) {
    if (has_cache_) {
      has_cache_ = false;
      return mean + stddev * cache_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cache_ = r * std::sin(a);
    has_cache_ = true;
    return mean + stddev * r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t k = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[k]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

}  // namespace macp
