#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace cgmmd {

/// splitmix64 finalizer. Used for seeding and for deriving independent stream seeds.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Seed for an independent sub-stream, e.g. derive_seed(seed, 2) for shuffling.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// xoshiro256** (Blackman & Vigna, 2018), state seeded from splitmix64(seed).
///
/// All sampling in the library goes through this class so that datasets, noise
/// and shuffles are reproducible across platforms and implementations:
///   uniform01  = (next() >> 11) * 2^-53                     in [0, 1)
///   normal     = Box-Muller on (u1, u2) with u1 = 1 - uniform01(), u2 = uniform01();
///                the cosine branch is returned first, the sine branch is cached
///                and returned by the following call
///   uniform_index(n) = rejection sampling on next() against the largest multiple of n
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next(); }
  result_type next() noexcept;

  double uniform01() noexcept;
  double uniform(double lo, double hi) noexcept;
  double normal() noexcept;
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  /// Fisher-Yates, swapping position i with uniform_index(i + 1) from the back.
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace cgmmd
