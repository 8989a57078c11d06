#ifndef FAULTBENCH_RNG_HPP_
#define FAULTBENCH_RNG_HPP_

#include <array>
#include <cstdint>

namespace faultbench {

/// SplitMix64 step: advances `state` by the golden-ratio increment and
/// returns the finalized value. Used for seeding and key mixing.
std::uint64_t splitmix64(std::uint64_t& state);

/// Stateless SplitMix64 finalizer of a single word.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream key from a parent seed and a counter
/// (fault position, frame index, ...). Collisions across distinct
/// (seed, counter) pairs are as unlikely as 64-bit hash collisions.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter);

/// Uniform double in (0, 1] from a 64-bit word (top 53 bits).
double unit_interval(std::uint64_t bits);

/// xoshiro256** 1.0 (Blackman & Vigna). The state is seeded by four
/// SplitMix64 outputs so any 64-bit seed gives a valid non-zero state.
/// Normal deviates use the Box-Muller transform on this generator only, so
/// sequences are reproducible independent of the standard library.
class Xoshiro256StarStar {
 public:
  explicit Xoshiro256StarStar(std::uint64_t seed);
  explicit Xoshiro256StarStar(const std::array<std::uint64_t, 4>& state);

  std::uint64_t next();

  /// Uniform in (0, 1].
  double uniform() { return unit_interval(next()); }

  /// Standard normal via Box-Muller; the second deviate of each pair is
  /// cached and returned by the following call.
  double normal();

  const std::array<std::uint64_t, 4>& state() const { return s_; }

 private:
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace faultbench

#endif  // FAULTBENCH_RNG_HPP_
