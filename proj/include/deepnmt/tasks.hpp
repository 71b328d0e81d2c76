#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "deepnmt/batch.hpp"

namespace deepnmt {

enum class TaskKind { copy, reverse, sort };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

/// Synthetic sequence transduction. Symbols are drawn uniformly from
/// [kFirstSymbol, vocab); content length uniformly from [min_len, max_len].
/// Both sides get a trailing kEos.
struct TaskSpec {
  TaskKind kind = TaskKind::copy;
  std::size_t vocab = 64;
  std::size_t min_len = 2;
  std::size_t max_len = 12;

  void validate() const;
};

/// Maps a source (without kEos) to its target (without kEos).
std::vector<int> task_target(TaskKind kind, std::vector<int> source);

SequencePair sample_pair(const TaskSpec& spec, Rng& rng);
std::vector<SequencePair> sample_pairs(const TaskSpec& spec, Rng& rng, std::size_t count);
/// Samples pairs until their target tokens (kEos included) reach `tokens`.
std::vector<SequencePair> sample_tokens(const TaskSpec& spec, Rng& rng, std::size_t tokens);

/// Greedy packing in order: a batch is closed when the next pair would push
/// its target-token count above `batch_tokens`.
std::vector<Batch> make_batches(std::span<const SequencePair> pairs, std::size_t batch_tokens);

/// Endless deterministic batch source over a synthetic task. Pairs are
/// drawn in pools of `pool_batches` batches' worth of tokens, sorted by
/// length so batches carry little padding, packed, and emitted in shuffled
/// order.
class BatchStream {
 public:
  BatchStream(TaskSpec spec, std::size_t batch_tokens, Rng rng, std::size_t pool_batches = 16);
  Batch next();

 private:
  void refill();

  TaskSpec spec_;
  std::size_t batch_tokens_;
  std::size_t pool_batches_;
  Rng rng_;
  std::vector<Batch> queue_;
};

}  // namespace deepnmt
