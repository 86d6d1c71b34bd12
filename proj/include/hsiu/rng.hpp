// Random number engines.
//
// The chain-level stream (MH proposals, generator draws) is a plain
// std::mt19937_64. Per-pixel draws inside the label and abundance kernels
// use CounterStream, a SplitMix64 generator whose start state is a hash of
// (seed, iteration, pixel, block). Those draws therefore do not depend on
// visiting order or thread count.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace hsiu {

using Engine = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class CounterStream {
 public:
  using result_type = std::uint64_t;

  CounterStream(std::uint64_t seed, std::uint64_t iteration, std::uint64_t index,
                std::uint64_t block) noexcept
      : state_(splitmix64(splitmix64(splitmix64(splitmix64(seed) ^ iteration) ^ index) ^ block)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Uniform on the open interval (0, 1), 53-bit resolution.
template <class Urbg>
double uniform_open(Urbg& rng) {
  static_assert(Urbg::min() == 0 && Urbg::max() == std::numeric_limits<std::uint64_t>::max());
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double standard_normal(auto& rng) { return std::normal_distribution<double>{}(rng); }

}  // namespace hsiu
