#ifndef FAUN_RANDOM_HPP_
#define FAUN_RANDOM_HPP_

#include <cstdint>

namespace faun {

/**
 * Counter-based uniform generator ("splitmix64-counter").
 *
 * Every value is a pure function of (seed, stream, row, col):
 *
 *   z = mix(seed + G * (stream + 1))
 *   z = mix(z ^ (row + G))
 *   z = mix(z ^ (col + 2G))
 *   u = (z >> 11) * 2^-53                      in [0, 1)
 *
 * where G = 0x9E3779B97F4A7C15 and mix() is the SplitMix64 finalizer
 * (xor-shift 30, * 0xBF58476D1CE4E5B9, xor-shift 27, * 0x94D049BB133111EB,
 * xor-shift 31). All arithmetic is modulo 2^64. Because an entry depends
 * only on its global coordinates, any block distribution of a matrix
 * generates exactly the same values as the sequential layout.
 */
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t bits(std::uint64_t stream, std::uint64_t row,
                               std::uint64_t col) const noexcept {
    constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = mix(seed_ + kGolden * (stream + 1));
    z = mix(z ^ (row + kGolden));
    return mix(z ^ (col + 2 * kGolden));
  }

  /// Uniform in [0, 1).
  constexpr double uniform(std::uint64_t stream, std::uint64_t row,
                           std::uint64_t col) const noexcept {
    return static_cast<double>(bits(stream, row, col) >> 11) * 0x1.0p-53;
  }

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
};

/// Stream ids used across the project, so no two consumers overlap.
namespace streams {
inline constexpr std::uint64_t kInitW = 0;
inline constexpr std::uint64_t kInitH = 1;
inline constexpr std::uint64_t kLowRankLeft = 2;
inline constexpr std::uint64_t kLowRankRight = 3;
inline constexpr std::uint64_t kSparsePattern = 4;
inline constexpr std::uint64_t kSparseValue = 5;
}  // namespace streams

}  // namespace faun

#endif  // FAUN_RANDOM_HPP_
