#include "deepnmt/tasks.hpp"

#include <algorithm>
#include <string>

namespace deepnmt {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::copy: return "copy";
    case TaskKind::reverse: return "reverse";
    case TaskKind::sort: return "sort";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "copy") return TaskKind::copy;
  if (name == "reverse") return TaskKind::reverse;
  if (name == "sort") return TaskKind::sort;
  throw ParameterError("unknown task '" + std::string(name) + "' (expected copy|reverse|sort)");
}

void TaskSpec::validate() const {
  if (vocab <= static_cast<std::size_t>(kFirstSymbol)) {
    throw ParameterError("task vocabulary must exceed the 3 special ids");
  }
  if (min_len < 1 || min_len > max_len) {
    throw ParameterError("task length range must satisfy 1 <= min_len <= max_len");
  }
}

std::vector<int> task_target(TaskKind kind, std::vector<int> source) {
  switch (kind) {
    case TaskKind::copy: break;
    case TaskKind::reverse: std::reverse(source.begin(), source.end()); break;
    case TaskKind::sort: std::sort(source.begin(), source.end()); break;
  }
  return source;
}

SequencePair sample_pair(const TaskSpec& spec, Rng& rng) {
  const std::size_t len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
  const std::uint64_t symbols = spec.vocab - kFirstSymbol;
  std::vector<int> src(len);
  for (auto& s : src) s = kFirstSymbol + static_cast<int>(rng.below(symbols));
  SequencePair p;
  p.target = task_target(spec.kind, src);
  p.source = std::move(src);
  p.source.push_back(kEos);
  p.target.push_back(kEos);
  return p;
}

std::vector<SequencePair> sample_pairs(const TaskSpec& spec, Rng& rng, std::size_t count) {
  spec.validate();
  std::vector<SequencePair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_pair(spec, rng));
  return out;
}

std::vector<SequencePair> sample_tokens(const TaskSpec& spec, Rng& rng, std::size_t tokens) {
  spec.validate();
  std::vector<SequencePair> out;
  std::size_t have = 0;
  while (have < tokens) {
    out.push_back(sample_pair(spec, rng));
    have += out.back().target.size();
  }
  return out;
}

std::vector<Batch> make_batches(std::span<const SequencePair> pairs, std::size_t batch_tokens) {
  if (batch_tokens < 1) throw ParameterError("batch_tokens must be >= 1");
  std::vector<Batch> out;
  std::size_t begin = 0, tokens = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::size_t n = pairs[i].target.size();
    if (n > batch_tokens) {
      throw ParameterError("sequence of " + std::to_string(n) + " target tokens exceeds batch size " +
                           std::to_string(batch_tokens));
    }
    if (tokens + n > batch_tokens) {
      out.push_back(make_batch(pairs.subspan(begin, i - begin)));
      begin = i;
      tokens = 0;
    }
    tokens += n;
  }
  if (begin < pairs.size()) out.push_back(make_batch(pairs.subspan(begin)));
  return out;
}

BatchStream::BatchStream(TaskSpec spec, std::size_t batch_tokens, Rng rng,
                         std::size_t pool_batches)
    : spec_(spec), batch_tokens_(batch_tokens), pool_batches_(pool_batches), rng_(rng) {
  spec_.validate();
  if (spec_.max_len + 1 > batch_tokens_) {
    throw ParameterError("batch_tokens " + std::to_string(batch_tokens_) +
                         " is smaller than the longest target (" +
                         std::to_string(spec_.max_len + 1) + ")");
  }
  if (pool_batches_ < 1) throw ParameterError("pool_batches must be >= 1");
}

void BatchStream::refill() {
  auto pairs = sample_tokens(spec_, rng_, batch_tokens_ * pool_batches_);
  std::stable_sort(pairs.begin(), pairs.end(), [](const SequencePair& a, const SequencePair& b) {
    if (a.target.size() != b.target.size()) return a.target.size() < b.target.size();
    return a.source.size() < b.source.size();
  });
  queue_ = make_batches(pairs, batch_tokens_);
  for (std::size_t i = queue_.size(); i > 1; --i) {
    std::swap(queue_[i - 1], queue_[rng_.below(i)]);
  }
}

Batch BatchStream::next() {
  if (queue_.empty()) refill();
  Batch b = std::move(queue_.back());
  queue_.pop_back();
  return b;
}

}  // namespace deepnmt
