#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "deepnmt/model.hpp"

namespace deepnmt {

/// Step-by-step decoder over a fixed encoder output.
///
/// Each row is one partial hypothesis tied to one source sentence. Per
/// layer the decoder keeps: the projected cross-attention keys/values of
/// every source (computed once); for self-attention variants the keys and
/// values of all previous positions of each row; for average-attention
/// variants only a running sum of width d per row.
class IncrementalDecoder {
 public:
  /// `memory` is the encoder output for the sources in `src` (rows b*len+i).
  /// `row_source[r]` names the source sentence of row r; empty means one row
  /// per source.
  IncrementalDecoder(const Model& model, const Tensor& memory, const SeqLayout& src,
                     std::vector<std::size_t> row_source = {});

  /// Feeds one token per row (the previous output, or kBos first) and
  /// returns next-token logits, [rows x tgt_vocab].
  Tensor step(std::span<const int> tokens);

  /// Keeps rows `parents` in that order (rows may repeat or disappear).
  void reorder(std::span<const std::size_t> parents);

  std::size_t rows() const noexcept { return row_source_.size(); }
  /// Tokens consumed so far.
  std::size_t position() const noexcept { return t_; }
  /// Number of cached scalars held for one row across all layers,
  /// excluding the per-source cross-attention keys/values.
  std::size_t state_size(std::size_t row) const;

 private:
  struct LayerCache {
    Tensor cross_k, cross_v;                   // [B*S x d]
    std::vector<std::vector<double>> k, v;     // per row, t*d
    Tensor sum;                                // [rows x d]
  };

  Tensor block(const Tensor& x, const std::string& ln_prefix,
               const std::function<Tensor(const Tensor&)>& f) const;
  Tensor cross_context(const Tensor& q, const LayerCache& c) const;
  Tensor self_context(const Tensor& z, std::size_t l, const std::string& prefix, LayerCache& c);
  const Tensor& w(const std::string& name) const { return model_.params.at(name); }

  const Model& model_;
  SeqLayout src_;
  std::vector<std::size_t> row_source_;
  std::vector<LayerCache> layers_;
  std::size_t t_ = 0;
};

struct Hypothesis {
  std::vector<int> tokens;  ///< generated ids, kEos excluded
  double log_prob = 0.0;
  std::size_t length = 0;   ///< generated ids, kEos included when present
  bool finished = false;    ///< ended with kEos
  double score = 0.0;
};

/// ((5 + len) / 6) ^ alpha.
double length_penalty(std::size_t length, double alpha);
/// log_prob / length_penalty(length, alpha).
double hypothesis_score(double log_prob, std::size_t length, double alpha);
/// Generation cap for a source of `source_len` symbols: 2 * source_len + 8.
std::size_t max_decode_length(std::size_t source_len);

/// Sources are symbol sequences without kEos; the decoder appends it.
std::vector<Hypothesis> greedy_decode(const Model& model,
                                      std::span<const std::vector<int>> sources,
                                      double len_penalty = 0.6);

/// Beam search with length-normalized final ranking. Every step keeps the
/// best (beam - finished) expansions by log-probability; expansions ending
/// in kEos retire. The best finished hypothesis is compared with the
/// greedy one under the same score and the better of the two returned.
Hypothesis beam_search(const Model& model, const std::vector<int>& source, std::size_t beam,
                       double len_penalty = 0.6);

/// Held-out quality of a model on complete pairs.
struct EvalStats {
  double token_acc = 0.0;    ///< teacher-forced, eval mode, over non-pad targets
  double exact_match = 0.0;  ///< greedy output equals the target content
};

/// Teacher-forced accuracy over `pairs` (packed into `batch_tokens` batches)
/// and greedy exact-match rate. Pairs carry trailing kEos on both sides.
EvalStats evaluate(const Model& model, std::span<const SequencePair> pairs,
                   std::size_t batch_tokens = 2048);

/// Multiply-accumulates of one decoder step for one row at position t
/// (1-based) against a source of `src_len` tokens, including the output
/// projection; the once-per-sentence cross key/value projection is excluded.
std::size_t decoder_step_macs(const ModelConfig& config, std::size_t t, std::size_t src_len);

struct BenchOptions {
  std::size_t reps = 5;
  std::size_t warmup = 3;
  std::size_t train_reps = 3;       ///< timed training steps per variant; 0 skips
  std::size_t train_batch_tokens = 512;
};

struct BenchRow {
  DecoderVariant variant = DecoderVariant::baseline;
  std::size_t layers = 0;
  double tokens_per_second = 0.0;
  double speedup_vs_baseline = 0.0;  ///< against the first baseline row
  std::size_t params = 0;
  double step_macs = 0.0;           ///< mean over the timed decode
  double train_step_seconds = 0.0;  ///< median; 0 when skipped
};

/// Decodes `sources` for exactly max_decode_length(longest source) steps
/// (kEos does not stop the loop, so every variant does the same number of
/// steps) and returns the wall-clock seconds of the decoder loop. The
/// encoder pass is excluded.
double time_decode(const Model& model, std::span<const std::vector<int>> sources);

/// Builds one model per variant from `base` (same seed) and times decoding.
/// Speedups are relative to the baseline row when present.
std::vector<BenchRow> bench_decode(const ModelConfig& base, std::span<const DecoderVariant> variants,
                                   std::span<const std::vector<int>> sources,
                                   const BenchOptions& options, std::uint64_t seed);

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);

}  // namespace deepnmt
