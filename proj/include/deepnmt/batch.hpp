#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "deepnmt/layers.hpp"

namespace deepnmt {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
/// First id available for task symbols.
inline constexpr int kFirstSymbol = 3;

/// One training example. Both sides end with kEos.
struct SequencePair {
  std::vector<int> source;
  std::vector<int> target;
};

/// Padded batch. Decoder input is the gold target shifted right behind kBos.
struct Batch {
  std::size_t size = 0;
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::vector<int> src;
  std::vector<int> tgt_in;
  std::vector<int> tgt_out;
  std::vector<std::size_t> src_lengths;
  std::vector<std::size_t> tgt_lengths;

  std::size_t target_tokens() const;
  SeqLayout src_layout() const { return {size, src_len, src_lengths}; }
  SeqLayout tgt_layout() const { return {size, tgt_len, tgt_lengths}; }
};

/// Pads `pairs` into one batch; `min_src_len`/`min_tgt_len` force extra padding.
Batch make_batch(std::span<const SequencePair> pairs, std::size_t min_src_len = 0,
                 std::size_t min_tgt_len = 0);

/// Batch with only a source side (for decoding).
Batch make_source_batch(std::span<const std::vector<int>> sources);

}  // namespace deepnmt
