#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "deepnmt/model.hpp"

namespace deepnmt {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  double clip_norm = 0.0;  ///< global-norm clipping threshold; 0 disables

  void validate() const;
};

/// First and second moments keyed by canonical parameter name.
struct OptimizerState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  std::size_t step = 0;
};

/// d^-0.5 * min(step^-0.5, step * warmup^-1.5). Step 0 is an error.
double lr_schedule(std::size_t step, std::size_t d, std::size_t warmup);

double global_norm(const std::map<std::string, Tensor>& grads);

/// One bias-corrected Adam update of every storage parameter. Parameters
/// without an entry in `grads` see a zero gradient. Returns the gradient
/// norm measured before clipping.
double adam_step(Parameters& params, const std::map<std::string, Tensor>& grads,
                 OptimizerState& state, double lr, const AdamConfig& config);

}  // namespace deepnmt
