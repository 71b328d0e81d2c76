#include "deepnmt/init.hpp"

#include <cmath>

namespace deepnmt {

std::string_view to_string(InitPolicy policy) {
  switch (policy) {
    case InitPolicy::glorot: return "glorot";
    case InitPolicy::ds_init: return "ds";
    case InitPolicy::fixed_sigma: return "fixed";
  }
  return "?";
}

InitPolicy parse_init_policy(std::string_view name) {
  if (name == "glorot") return InitPolicy::glorot;
  if (name == "ds" || name == "ds_init") return InitPolicy::ds_init;
  if (name == "fixed" || name == "fixed_sigma") return InitPolicy::fixed_sigma;
  throw ParameterError("unknown init policy '" + std::string(name) + "'");
}

void InitSpec::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ParameterError("init alpha must lie in [0,1], got " + std::to_string(alpha));
  }
  if (layer < 1) throw ParameterError("init layer depth must be >= 1");
  if (d_in < 1 || d_out < 1) throw ParameterError("init dimensions must be >= 1");
  if (policy == InitPolicy::fixed_sigma && !(sigma > 0.0)) {
    throw ParameterError("fixed_sigma init needs sigma > 0, got " + std::to_string(sigma));
  }
}

double glorot_bound(std::size_t d_in, std::size_t d_out) {
  if (d_in < 1 || d_out < 1) throw ParameterError("glorot_bound: dimensions must be >= 1");
  return std::sqrt(6.0 / static_cast<double>(d_in + d_out));
}

double ds_init_bound(const InitSpec& spec) {
  spec.validate();
  return glorot_bound(spec.d_in, spec.d_out) * spec.alpha /
         std::sqrt(static_cast<double>(spec.layer));
}

double ds_init_variance(const InitSpec& spec) {
  const double b = ds_init_bound(spec);
  return b * b / 3.0;
}

Tensor glorot_sample(Rng& rng, std::size_t d_in, std::size_t d_out) {
  const double g = glorot_bound(d_in, d_out);
  return uniform(rng, -g, g, {d_in, d_out});
}

Tensor ds_init_sample(Rng& rng, const InitSpec& spec) {
  if (spec.policy != InitPolicy::ds_init) throw ParameterError("ds_init_sample needs policy ds_init");
  const double b = ds_init_bound(spec);
  if (b == 0.0) return Tensor({spec.d_in, spec.d_out});  // alpha = 0 collapses the range
  return uniform(rng, -b, b, {spec.d_in, spec.d_out});
}

Tensor fixed_sigma_sample(Rng& rng, const InitSpec& spec) {
  spec.validate();
  if (spec.policy != InitPolicy::fixed_sigma) {
    throw ParameterError("fixed_sigma_sample needs policy fixed_sigma");
  }
  return normal(rng, 0.0, spec.sigma, {spec.d_in, spec.d_out});
}

Tensor sample_weights(Rng& rng, const InitSpec& spec) {
  spec.validate();
  switch (spec.policy) {
    case InitPolicy::glorot: return glorot_sample(rng, spec.d_in, spec.d_out);
    case InitPolicy::ds_init: return ds_init_sample(rng, spec);
    case InitPolicy::fixed_sigma: return fixed_sigma_sample(rng, spec);
  }
  throw ParameterError("unknown init policy");
}

}  // namespace deepnmt
