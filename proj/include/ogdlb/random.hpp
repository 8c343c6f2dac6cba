#pragma once

// Counter-based, splittable random streams.
//
// Every draw in a simulation comes from a short-lived xoshiro256** generator
// whose 64-bit seed is a pure function of (path seed, round, player, purpose).
// That makes any individual draw reproducible without replaying the stream
// and keeps paths independent of thread scheduling.
//
// Algorithm identity (kRngVersion = 1):
//   key mixing   splitmix64 finalizer over sequential combines
//   generator    xoshiro256**, state filled by splitmix64 from the seed
//   uniform      top 53 bits scaled by 2^-53, in [0, 1)
//   normal       Marsaglia polar method, no cached second variate

#include <cmath>
#include <cstdint>
#include <limits>

namespace ogdlb {

inline constexpr int kRngVersion = 1;

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t combine_key(std::uint64_t key, std::uint64_t v) noexcept {
  return mix64(key ^ (mix64(v + 0x9e3779b97f4a7c15ULL) + 0x632be59bd9b4e019ULL));
}

enum class StreamTag : std::uint64_t { sphere = 1, loss = 2, init = 3, aux = 4 };

/// Seed of path `path_index` under `master_seed`. Stable across releases.
inline constexpr std::uint64_t derive_seed(std::uint64_t master_seed,
                                           std::uint64_t path_index) noexcept {
  return combine_key(combine_key(0x4f47442d6c62ULL, master_seed), path_index);
}

/// Seed of the per-round, per-player substream for one purpose.
inline constexpr std::uint64_t substream_seed(std::uint64_t path_seed, std::uint64_t round,
                                              std::uint64_t player, StreamTag tag) noexcept {
  std::uint64_t h = combine_key(path_seed, round);
  h = combine_key(h, player);
  return combine_key(h, static_cast<std::uint64_t>(tag));
}

class RandomSource {
 public:
  using result_type = std::uint64_t;

  explicit RandomSource(std::uint64_t seed) noexcept {
    std::uint64_t x = seed;
    for (auto& s : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      s = mix64(x);
    }
  }

  RandomSource(std::uint64_t path_seed, std::uint64_t round, std::uint64_t player,
               StreamTag tag) noexcept
      : RandomSource(substream_seed(path_seed, round, player, tag)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double normal() noexcept {
    for (;;) {
      const double u = 2.0 * uniform() - 1.0;
      const double v = 2.0 * uniform() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Uniform integer in [0, n). Lemire's rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n == 0) return 0;
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
      if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
};

}  // namespace ogdlb
