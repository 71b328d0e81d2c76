#include "deepnmt/rng.hpp"

#include <cmath>
#include <numbers>

namespace deepnmt {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return splitmix_mix(state_);
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal() {
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ParameterError("Rng::below(0)");
  // Rejection keeps the result exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Rng Rng::fork(std::uint64_t tag) const {
  return Rng(splitmix_mix(seed_ ^ splitmix_mix(tag + kGolden)));
}

Tensor uniform(Rng& rng, double lo, double hi, const Shape& shape) {
  if (!(lo < hi)) {
    throw ParameterError("uniform: need lo < hi, got lo=" + std::to_string(lo) +
                         " hi=" + std::to_string(hi));
  }
  Tensor out(shape);
  for (auto& v : out.values()) v = rng.uniform(lo, hi);
  return out;
}

Tensor normal(Rng& rng, double mean, double stddev, const Shape& shape) {
  if (!(stddev > 0.0)) throw ParameterError("normal: stddev must be positive");
  Tensor out(shape);
  for (auto& v : out.values()) v = mean + stddev * rng.normal();
  return out;
}

}  // namespace deepnmt
