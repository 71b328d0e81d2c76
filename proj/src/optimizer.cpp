#include "deepnmt/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace deepnmt {

void AdamConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ParameterError("adam beta1 must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ParameterError("adam beta2 must lie in [0,1)");
  if (!(eps > 0.0)) throw ParameterError("adam eps must be positive");
  if (!(clip_norm >= 0.0)) throw ParameterError("clip_norm must be >= 0");
}

double lr_schedule(std::size_t step, std::size_t d, std::size_t warmup) {
  if (step == 0) throw ParameterError("lr_schedule: steps are 1-based");
  if (d == 0 || warmup == 0) throw ParameterError("lr_schedule: d and warmup must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return std::pow(static_cast<double>(d), -0.5) * std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

double global_norm(const std::map<std::string, Tensor>& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    for (double v : g.values()) sq += v * v;
  }
  return std::sqrt(sq);
}

double adam_step(Parameters& params, const std::map<std::string, Tensor>& grads,
                 OptimizerState& state, double lr, const AdamConfig& config) {
  config.validate();
  const double norm = global_norm(grads);
  const double clip =
      config.clip_norm > 0.0 && norm > config.clip_norm ? config.clip_norm / norm : 1.0;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (const auto& name : params.storage_names()) {
    Tensor& p = params.at(name);
    auto git = grads.find(name);
    const Tensor* g = git == grads.end() ? nullptr : &git->second;
    if (g && g->shape() != p.shape()) {
      throw DimensionError("gradient for '" + name + "' has shape " + shape_str(g->shape()) +
                           ", parameter has " + shape_str(p.shape()));
    }
    auto [mit, m_new] = state.m.try_emplace(name, p.shape());
    auto [vit, v_new] = state.v.try_emplace(name, p.shape());
    double* m = mit->second.data();
    double* v = vit->second.data();
    double* w = p.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g ? (*g)[i] * clip : 0.0;
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      w[i] -= lr * mh / (std::sqrt(vh) + config.eps);
    }
  }
  return norm;
}

}  // namespace deepnmt
