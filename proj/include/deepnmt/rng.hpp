#pragma once

#include <cstdint>

#include "deepnmt/tensor.hpp"

namespace deepnmt {

/// Portable seeded generator.
///
/// The stream is SplitMix64: a 64-bit counter advanced by the golden-ratio
/// increment 0x9E3779B97F4A7C15, with each output the counter passed through
/// the finalizer
///
///     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///     z =  z ^ (z >> 31)
///
/// Uniform doubles use the top 53 bits: (x >> 11) * 2^-53, giving [0, 1).
/// Gaussian samples use Box-Muller on two consecutive uniforms
/// (u1 mapped to (0, 1]), keeping only the cosine branch, so every normal()
/// consumes exactly two outputs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64();
  double uniform01();
  double uniform(double lo, double hi);
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Independent child stream derived from this generator's seed and a tag.
  /// Does not advance this generator.
  Rng fork(std::uint64_t tag) const;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

/// Finalizer applied to an arbitrary 64-bit word.
std::uint64_t splitmix_mix(std::uint64_t z);

/// Tensor of i.i.d. U(lo, hi) samples. Requires lo < hi.
Tensor uniform(Rng& rng, double lo, double hi, const Shape& shape);
/// Tensor of i.i.d. N(mean, stddev^2) samples. Requires stddev > 0.
Tensor normal(Rng& rng, double mean, double stddev, const Shape& shape);

}  // namespace deepnmt
