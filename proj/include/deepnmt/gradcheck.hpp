#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "deepnmt/tape.hpp"

namespace deepnmt {

/// Builds a scalar on `tape` from the differentiable input `x`.
using ScalarFn = std::function<Var(Tape& tape, Var x)>;

struct GradCheckOptions {
  /// Check at most this many coordinates (chosen by seeded sampling); 0 = all.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  /// Leave out coordinates whose +-eps probes land on a different linear
  /// piece of some relu than x itself. There the function is not
  /// differentiable inside the probe interval and the difference quotient
  /// measures the kink, not the gradient.
  bool skip_relu_kinks = false;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Central-difference check of the tape gradient of f at x.
///
/// Returns max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8) over the checked
/// coordinates, where a is the analytic gradient and
/// n_i = (f(x + eps e_i) - f(x - eps e_i)) / (2 eps). eps must lie in [1e-7, 1e-3].
double grad_check(const ScalarFn& f, const Tensor& x, double eps,
                  const GradCheckOptions& options = {});

/// Same comparison against a caller-supplied analytic gradient. `loss`
/// re-evaluates the objective after `x` has been perturbed in place; x is
/// restored before returning.
double grad_check_inplace(const std::function<double()>& loss, Tensor& x, const Tensor& analytic,
                          double eps, const GradCheckOptions& options = {});

/// As grad_check_inplace, also reporting how many coordinates were compared
/// and how many were left out as relu kinks.
GradCheckReport grad_check_report(const std::function<double()>& loss, Tensor& x, const Tensor& analytic,
                                  double eps, const GradCheckOptions& options = {});

inline constexpr double kGradCheckFloor = 1e-8;

}  // namespace deepnmt
