#include "deepnmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "deepnmt/ops.hpp"
#include "deepnmt/rng.hpp"

namespace deepnmt {

namespace {

std::vector<std::size_t> pick_coords(std::size_t n, const GradCheckOptions& options) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (options.max_coords == 0 || options.max_coords >= n) return idx;
  Rng rng(options.seed);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < options.max_coords; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(options.max_coords);
  return idx;
}

void check_eps(double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ParameterError("grad_check eps must lie in [1e-7, 1e-3], got " + std::to_string(eps));
  }
}

}  // namespace

GradCheckReport grad_check_report(const std::function<double()>& loss, Tensor& x, const Tensor& analytic,
                                  double eps, const GradCheckOptions& options) {
  check_eps(eps);
  if (analytic.shape() != x.shape()) {
    throw DimensionError("grad_check: analytic gradient " + shape_str(analytic.shape()) +
                         " vs input " + shape_str(x.shape()));
  }
  std::optional<ad::ReluPatternWatch> watch;
  std::uint64_t centre = 0;
  if (options.skip_relu_kinks) {
    watch.emplace();
    loss();
    centre = watch->take();
  }
  GradCheckReport r;
  for (std::size_t i : pick_coords(x.size(), options)) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double up = loss();
    const std::uint64_t up_pattern = watch ? watch->take() : 0;
    x[i] = orig - eps;
    const double down = loss();
    const std::uint64_t down_pattern = watch ? watch->take() : 0;
    x[i] = orig;
    if (watch && (up_pattern != centre || down_pattern != centre)) {
      ++r.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(a - numeric) / denom);
    ++r.checked;
  }
  return r;
}

double grad_check_inplace(const std::function<double()>& loss, Tensor& x, const Tensor& analytic,
                          double eps, const GradCheckOptions& options) {
  return grad_check_report(loss, x, analytic, eps, options).max_rel_error;
}

double grad_check(const ScalarFn& f, const Tensor& x, double eps, const GradCheckOptions& options) {
  check_eps(eps);
  Tensor analytic;
  {
    Tape tape;
    Var xv = tape.leaf(x);
    Var out = f(tape, xv);
    tape.backward(out);
    analytic = tape.grad(xv).empty() ? Tensor(x.shape()) : tape.grad(xv);
  }
  Tensor probe = x;
  auto eval = [&]() {
    Tape tape;
    Var xv = tape.constant(probe);
    return tape.value(f(tape, xv)).item();
  };
  return grad_check_inplace(eval, probe, analytic, eps, options);
}

}  // namespace deepnmt
