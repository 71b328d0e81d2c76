#pragma once

#include <cstddef>
#include <vector>

#include "deepnmt/ops.hpp"

namespace deepnmt {

/// Batch geometry of a [batch*len x d] activation. `lengths` holds the
/// number of real (non-pad) positions per sequence; empty means all full.
struct SeqLayout {
  std::size_t batch = 1;
  std::size_t len = 1;
  std::vector<std::size_t> lengths;

  std::size_t rows() const noexcept { return batch * len; }
  std::size_t length(std::size_t b) const { return lengths.empty() ? len : lengths[b]; }
  void validate() const;
};

enum class Mode { train, eval };

inline constexpr double kLayerNormEps = 1e-6;

struct LayerNormVars {
  Var gain;
  Var bias;
  double eps = kLayerNormEps;
};

struct FfnVars {
  Var w1, b1, w2, b2;
};

/// Attention projections. Projections carry no bias.
struct AttentionVars {
  Var wq, wk, wv, wo;
  std::size_t heads = 1;
};

struct AttentionOptions {
  bool causal = false;
  double dropout = 0.0;  ///< on attention weights
  Rng* rng = nullptr;    ///< null disables dropout
};

struct SaanVars {
  Var wv, wo;
};

/// Original average attention: FFN over the running average, then sigmoid
/// input/forget gates computed from [input; FFN output].
struct AanVars {
  FfnVars ffn;
  Var gate_w;  ///< [2d x 2d]
  Var gate_b;  ///< [2d]
};

Var layer_norm(Tape& t, Var z, const LayerNormVars& p);
/// z + fz.
Var residual(Tape& t, Var z, Var fz);
/// relu(x W1 + b1) W2 + b2.
Var ffn(Tape& t, Var x, const FfnVars& p);

/// Concatenated per-head softmax(Q K^T / sqrt(d/h)) V, before the output projection.
Var attention_context(Tape& t, Var zx, const SeqLayout& x_layout, Var zy,
                      const SeqLayout& y_layout, const AttentionVars& p,
                      const AttentionOptions& options);
/// attention_context(...) W_o.
Var attention(Tape& t, Var zx, const SeqLayout& x_layout, Var zy, const SeqLayout& y_layout,
              const AttentionVars& p, const AttentionOptions& options);

/// m x m lower-triangular matrix whose row t (1-based) is 1/t on columns 1..t.
Tensor average_mask(std::size_t m);

/// M_a (S W_v), the running average of projected states.
Var saan_average(Tape& t, Var s, const SeqLayout& layout, Var wv);
/// [M_a (S W_v)] W_o.
Var saan(Tape& t, Var s, const SeqLayout& layout, const SaanVars& p);
Var aan_original(Tape& t, Var s, const SeqLayout& layout, const AanVars& p);

/// SAAN(S) + ATT(S, H) with one shared W_o: (M_a S W_v + context(S, H)) W_o.
Var merged_attention(Tape& t, Var s, const SeqLayout& s_layout, Var h, const SeqLayout& h_layout,
                     Var saan_wv, const AttentionVars& cross, const AttentionOptions& options);

/// Inverted dropout in train mode; identity in eval mode.
Var dropout(Tape& t, Var x, double rate, Rng* rng, Mode mode);

/// Sinusoidal encoding: even columns sin(pos / 10000^(2i/d)), odd columns cos.
Tensor positional_encoding(std::size_t n, std::size_t d);

}  // namespace deepnmt
