#include "deepnmt/batch.hpp"

#include <algorithm>
#include <numeric>

namespace deepnmt {

std::size_t Batch::target_tokens() const {
  return std::accumulate(tgt_lengths.begin(), tgt_lengths.end(), std::size_t{0});
}

Batch make_batch(std::span<const SequencePair> pairs, std::size_t min_src_len,
                 std::size_t min_tgt_len) {
  if (pairs.empty()) throw ParameterError("make_batch: no sequences");
  Batch b;
  b.size = pairs.size();
  b.src_len = min_src_len;
  b.tgt_len = min_tgt_len;
  for (const auto& p : pairs) {
    if (p.source.empty() || p.target.empty()) throw ParameterError("make_batch: empty sequence");
    b.src_len = std::max(b.src_len, p.source.size());
    b.tgt_len = std::max(b.tgt_len, p.target.size());
  }
  b.src.assign(b.size * b.src_len, kPad);
  b.tgt_in.assign(b.size * b.tgt_len, kPad);
  b.tgt_out.assign(b.size * b.tgt_len, kPad);
  for (std::size_t i = 0; i < b.size; ++i) {
    const auto& p = pairs[i];
    std::copy(p.source.begin(), p.source.end(), b.src.begin() + i * b.src_len);
    std::copy(p.target.begin(), p.target.end(), b.tgt_out.begin() + i * b.tgt_len);
    b.tgt_in[i * b.tgt_len] = kBos;
    std::copy(p.target.begin(), p.target.end() - 1, b.tgt_in.begin() + i * b.tgt_len + 1);
    b.src_lengths.push_back(p.source.size());
    b.tgt_lengths.push_back(p.target.size());
  }
  return b;
}

Batch make_source_batch(std::span<const std::vector<int>> sources) {
  if (sources.empty()) throw ParameterError("make_source_batch: no sequences");
  Batch b;
  b.size = sources.size();
  for (const auto& s : sources) {
    if (s.empty()) throw ParameterError("make_source_batch: empty source");
    b.src_len = std::max(b.src_len, s.size());
  }
  b.src.assign(b.size * b.src_len, kPad);
  for (std::size_t i = 0; i < b.size; ++i) {
    std::copy(sources[i].begin(), sources[i].end(), b.src.begin() + i * b.src_len);
    b.src_lengths.push_back(sources[i].size());
  }
  return b;
}

}  // namespace deepnmt
