#pragma once

#include <cstdint>

#include <cstddef>
#include <span>
#include <vector>

#include "deepnmt/rng.hpp"
#include "deepnmt/tape.hpp"

namespace deepnmt::ad {

// Differentiable ops recorded on a Tape. Activations are matrices whose
// rows are token positions: a batch of B sequences padded to length T is a
// [B*T x d] matrix with row b*T + t.

Var matmul(Tape& t, Var a, Var b);     // a[n x k] * b[k x m]
Var matmul_nt(Tape& t, Var a, Var b);  // a[n x k] * b[m x k]^T
Var add(Tape& t, Var a, Var b);
Var add_bias(Tape& t, Var x, Var bias);  // bias is a length-cols vector
/// Adds a constant [len x cols] pattern to every block of `len` rows.
Var add_tiled(Tape& t, Var x, const Tensor& pattern);
Var scale(Tape& t, Var x, double s);
Var mul(Tape& t, Var a, Var b);
Var relu(Tape& t, Var x);

/// While an instance is alive on this thread, every relu folds the sign
/// pattern of its input into a running hash. Two evaluations with equal
/// hashes took the same linear piece of every relu.
class ReluPatternWatch {
 public:
  ReluPatternWatch();
  ~ReluPatternWatch();
  ReluPatternWatch(const ReluPatternWatch&) = delete;
  ReluPatternWatch& operator=(const ReluPatternWatch&) = delete;
  /// Returns the hash accumulated since the last call and starts a new one.
  std::uint64_t take();

 private:
  ReluPatternWatch* previous_;
};
Var sigmoid(Tape& t, Var x);
Var sum(Tape& t, Var x);
Var concat_cols(Tape& t, Var a, Var b);
Var slice_cols(Tape& t, Var x, std::size_t begin, std::size_t end);

/// Row-wise (z - mean) / sqrt(var + eps) * gain + bias with population variance.
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps);

/// Row-wise softmax over the last axis; `mask` (same shape, optional) is added first.
Var softmax(Tape& t, Var x, const Tensor& mask = {});

/// Geometry and masking for the fused scaled-dot-product core.
struct AttendSpec {
  std::size_t batch = 1;
  std::size_t q_len = 1;
  std::size_t k_len = 1;
  std::size_t heads = 1;
  bool causal = false;
  /// Valid key count per sequence; empty means all keys valid.
  std::vector<std::size_t> key_lengths;
  /// Dropout on attention weights (train mode only when rng is set).
  double dropout = 0.0;
  Rng* rng = nullptr;
};

/// Additive mask value for disallowed positions.
inline constexpr double kMaskValue = -1e9;

/// Multi-head softmax(Q K^T / sqrt(d/h)) V per sequence, heads concatenated.
/// q is [batch*q_len x d]; k and v are [batch*k_len x d].
Var attend(Tape& t, Var q, Var k, Var v, const AttendSpec& spec);

/// Row i of each length-`len` block becomes the mean of rows 0..i of that block.
Var causal_mean(Tape& t, Var x, std::size_t batch, std::size_t len);

/// out[r] = table[ids[r]] * scale.
Var gather_rows(Tape& t, Var table, std::span<const int> ids, double scale);

/// Inverted dropout. Identity when rate == 0 or rng is null (eval mode).
Var dropout(Tape& t, Var x, double rate, Rng* rng);

/// Mean over non-pad rows of the cross-entropy against the smoothed target
/// that puts 1 - eps on the gold id and eps / (V - 1) on each other id.
Var smoothed_xent(Tape& t, Var logits, std::span<const int> gold, double eps, int pad_id = 0);

}  // namespace deepnmt::ad
