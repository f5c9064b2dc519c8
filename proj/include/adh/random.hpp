#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace adh {

/// SplitMix64 finalizer; a strong 64-bit bijective mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a stream key from a seed and an ordered list of integer coordinates.
/// Pure: the same inputs always give the same key.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = mix64(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::uint64_t c : coords) h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

/// Counter-based generator: the n-th output is mix64(key + n * gamma).
/// Satisfies UniformRandomBitGenerator so it plugs into <random> distributions.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit constexpr SplitMix64(std::uint64_t key) : state_(key) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  constexpr result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

/// Uniform in (0, 1]; never returns 0.
inline double uniform_open0(SplitMix64& g) {
  return (static_cast<double>(g() >> 11) + 1.0) * 0x1.0p-53;
}

namespace stream_tag {
inline constexpr std::uint64_t kPrmCell = 1;
inline constexpr std::uint64_t kInitialAge = 2;
inline constexpr std::uint64_t kValidation = 3;
}  // namespace stream_tag

}  // namespace adh
