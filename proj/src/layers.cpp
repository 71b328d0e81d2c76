#include "deepnmt/layers.hpp"

#include <cmath>

namespace deepnmt {

void SeqLayout::validate() const {
  if (batch == 0 || len == 0) throw DimensionError("sequence layout needs batch, len >= 1");
  if (!lengths.empty()) {
    if (lengths.size() != batch) {
      throw DimensionError("mask has " + std::to_string(lengths.size()) +
                           " lengths for batch of " + std::to_string(batch));
    }
    for (auto l : lengths) {
      if (l == 0 || l > len) throw DimensionError("sequence length " + std::to_string(l) +
                                                  " outside [1, " + std::to_string(len) + "]");
    }
  }
}

Var layer_norm(Tape& t, Var z, const LayerNormVars& p) {
  if (t.value(z).cols() < 2) throw DimensionError("layer_norm needs width >= 2");
  return ad::layer_norm(t, z, p.gain, p.bias, p.eps);
}

Var residual(Tape& t, Var z, Var fz) { return ad::add(t, z, fz); }

Var ffn(Tape& t, Var x, const FfnVars& p) {
  Var hidden = ad::relu(t, ad::add_bias(t, ad::matmul(t, x, p.w1), p.b1));
  return ad::add_bias(t, ad::matmul(t, hidden, p.w2), p.b2);
}

Var attention_context(Tape& t, Var zx, const SeqLayout& x_layout, Var zy,
                      const SeqLayout& y_layout, const AttentionVars& p,
                      const AttentionOptions& options) {
  x_layout.validate();
  y_layout.validate();
  if (x_layout.batch != y_layout.batch) {
    throw DimensionError("attention: query batch " + std::to_string(x_layout.batch) +
                         " vs key batch " + std::to_string(y_layout.batch));
  }
  Var q = ad::matmul(t, zx, p.wq);
  Var k = ad::matmul(t, zy, p.wk);
  Var v = ad::matmul(t, zy, p.wv);
  ad::AttendSpec spec;
  spec.batch = x_layout.batch;
  spec.q_len = x_layout.len;
  spec.k_len = y_layout.len;
  spec.heads = p.heads;
  spec.causal = options.causal;
  spec.key_lengths = y_layout.lengths;
  spec.dropout = options.dropout;
  spec.rng = options.rng;
  return ad::attend(t, q, k, v, spec);
}

Var attention(Tape& t, Var zx, const SeqLayout& x_layout, Var zy, const SeqLayout& y_layout,
              const AttentionVars& p, const AttentionOptions& options) {
  return ad::matmul(t, attention_context(t, zx, x_layout, zy, y_layout, p, options), p.wo);
}

Tensor average_mask(std::size_t m) {
  if (m < 1) throw ParameterError("average_mask needs m >= 1");
  Tensor out({m, m});
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c <= r; ++c) out.at(r, c) = 1.0 / static_cast<double>(r + 1);
  }
  return out;
}

Var saan_average(Tape& t, Var s, const SeqLayout& layout, Var wv) {
  layout.validate();
  return ad::causal_mean(t, ad::matmul(t, s, wv), layout.batch, layout.len);
}

Var saan(Tape& t, Var s, const SeqLayout& layout, const SaanVars& p) {
  return ad::matmul(t, saan_average(t, s, layout, p.wv), p.wo);
}

Var aan_original(Tape& t, Var s, const SeqLayout& layout, const AanVars& p) {
  layout.validate();
  const std::size_t d = t.value(s).cols();
  Var avg = ad::causal_mean(t, s, layout.batch, layout.len);
  Var g = ffn(t, avg, p.ffn);
  Var gates = ad::sigmoid(
      t, ad::add_bias(t, ad::matmul(t, ad::concat_cols(t, s, g), p.gate_w), p.gate_b));
  Var input_gate = ad::slice_cols(t, gates, 0, d);
  Var forget_gate = ad::slice_cols(t, gates, d, 2 * d);
  return ad::add(t, ad::mul(t, input_gate, s), ad::mul(t, forget_gate, g));
}

Var merged_attention(Tape& t, Var s, const SeqLayout& s_layout, Var h, const SeqLayout& h_layout,
                     Var saan_wv, const AttentionVars& cross, const AttentionOptions& options) {
  // Dropout applies to the cross-attention weights only.
  Var avg = saan_average(t, s, s_layout, saan_wv);
  AttentionOptions cross_opts = options;
  cross_opts.causal = false;
  Var ctx = attention_context(t, s, s_layout, h, h_layout, cross, cross_opts);
  return ad::matmul(t, ad::add(t, avg, ctx), cross.wo);
}

Var dropout(Tape& t, Var x, double rate, Rng* rng, Mode mode) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ParameterError("dropout rate must be in [0,1), got " + std::to_string(rate));
  }
  return ad::dropout(t, x, rate, mode == Mode::train ? rng : nullptr);
}

Tensor positional_encoding(std::size_t n, std::size_t d) {
  if (d == 0 || d % 2 != 0) {
    throw ParameterError("positional encoding width must be even, got " + std::to_string(d));
  }
  Tensor out({n, d});
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
      out.at(pos, 2 * i) = std::sin(static_cast<double>(pos) * freq);
      out.at(pos, 2 * i + 1) = std::cos(static_cast<double>(pos) * freq);
    }
  }
  return out;
}

}  // namespace deepnmt
