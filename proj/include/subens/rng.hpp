#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace subens {

/// SplitMix64 finalizer. Used to derive independent seeds:
/// derive_seed(seed, i) == splitmix64(seed + i).
std::uint64_t splitmix64(std::uint64_t x) noexcept;

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(seed + index);
}

/// xoshiro256** 1.0 (Blackman & Vigna), state seeded by four successive
/// SplitMix64 outputs. All randomness in the library flows through this
/// generator so results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the Box-Muller transform (cached second value).
  double normal() noexcept;

  /// Uniform integer in [0, bound) by Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace subens
