#pragma once

#include <cstdint>
#include <limits>

namespace jamfield {

/// SplitMix64: small-state generator used for counter-style stream splitting.
/// Every observer, realization and network initialization draws from its own
/// stream, so results do not depend on evaluation order or thread count.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Seed for stream `index` of kind `stream` under `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t h = SplitMix64::mix(base ^ 0x6a09e667f3bcc909ULL);
  h = SplitMix64::mix(h ^ (stream * 0x9e3779b97f4a7c15ULL));
  return SplitMix64::mix(h ^ (index + 0x3c6ef372fe94f82bULL));
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(SplitMix64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

namespace streams {
inline constexpr std::uint64_t kObservers = 1;
inline constexpr std::uint64_t kNoise = 2;
inline constexpr std::uint64_t kRealization = 3;
inline constexpr std::uint64_t kEstimator = 4;
inline constexpr std::uint64_t kStarts = 5;
}  // namespace streams

}  // namespace jamfield
