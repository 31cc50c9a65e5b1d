#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace srn {

/// SplitMix64 step. Used for seeding and for deriving stream seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministically mixes a seed with up to two stream identifiers.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// xoshiro256** (Blackman & Vigna) seeded through SplitMix64.
///
/// Every conversion to doubles and bounded integers is done here rather than
/// through <random> distributions, whose output is implementation-defined, so
/// datasets and initializations are bit-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Independent generator for a numbered sub-stream; does not advance *this.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

}  // namespace srn
