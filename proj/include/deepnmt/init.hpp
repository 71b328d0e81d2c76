#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "deepnmt/rng.hpp"

namespace deepnmt {

enum class InitPolicy { glorot, ds_init, fixed_sigma };

std::string_view to_string(InitPolicy policy);
/// Accepts "glorot", "ds" / "ds_init", "fixed" / "fixed_sigma".
InitPolicy parse_init_policy(std::string_view name);

/// How to draw one weight matrix of shape [d_in x d_out].
struct InitSpec {
  InitPolicy policy = InitPolicy::glorot;
  double alpha = 1.0;   ///< depth-scaling multiplier, in [0, 1]
  double sigma = 0.02;  ///< stddev for fixed_sigma
  std::size_t layer = 1;  ///< 1-based depth of the owning layer
  std::size_t d_in = 1;
  std::size_t d_out = 1;

  void validate() const;
};

/// sqrt(6 / (d_in + d_out)).
double glorot_bound(std::size_t d_in, std::size_t d_out);

/// Half-width of the uniform range: glorot_bound * alpha / sqrt(layer).
double ds_init_bound(const InitSpec& spec);

/// Variance of ds_init samples: bound^2 / 3 = gamma^2 alpha^2 / (3 l).
double ds_init_variance(const InitSpec& spec);

Tensor glorot_sample(Rng& rng, std::size_t d_in, std::size_t d_out);
Tensor ds_init_sample(Rng& rng, const InitSpec& spec);
Tensor fixed_sigma_sample(Rng& rng, const InitSpec& spec);

/// Draws according to spec.policy.
Tensor sample_weights(Rng& rng, const InitSpec& spec);

/// What was used to initialize one parameter (build metadata).
struct InitRecord {
  InitPolicy policy = InitPolicy::glorot;
  std::size_t layer = 0;  ///< 0 for parameters outside any layer
  double bound = 0.0;     ///< uniform half-width; 0 for Gaussian or constant init
  double stddev = 0.0;    ///< Gaussian stddev; 0 otherwise
};

}  // namespace deepnmt
