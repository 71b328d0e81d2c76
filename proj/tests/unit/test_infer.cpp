#include <doctest.h>

#include <cmath>
#include <sstream>

#include "deepnmt/infer.hpp"

using namespace deepnmt;

namespace {

ModelConfig cfg(DecoderVariant v, std::size_t layers = 2) {
  ModelConfig c;
  c.layers = layers;
  c.dim = 16;
  c.ffn_dim = 24;
  c.heads = 4;
  c.src_vocab = c.tgt_vocab = 24;
  c.decoder = v;
  return c;
}

Model make(const ModelConfig& c, std::uint64_t seed = 1) {
  Rng rng(seed);
  return build(c, rng);
}

constexpr DecoderVariant kVariants[] = {DecoderVariant::baseline, DecoderVariant::matt,
                                        DecoderVariant::matt_self, DecoderVariant::aan_original};

std::vector<int> random_symbols(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<int> s(n);
  for (int& x : s) x = kFirstSymbol + static_cast<int>(rng.below(vocab - kFirstSymbol));
  return s;
}

// Largest gap between step-wise logits and teacher-forced logits of the same prefixes.
double cache_gap(const Model& m, std::uint64_t seed, std::size_t steps) {
  Rng rng(seed);
  const std::size_t V = m.config.tgt_vocab;
  std::vector<SequencePair> pairs;
  for (std::size_t b = 0; b < 3; ++b) {
    auto src = random_symbols(rng, 2 + rng.below(6), V);
    src.push_back(kEos);
    auto tgt = random_symbols(rng, steps - 1, V);
    tgt.push_back(kEos);
    pairs.push_back({src, tgt});
  }
  const Batch batch = make_batch(pairs);
  const Tensor full = decode_train(m, batch);
  const Tensor memory = encode(m, batch);
  IncrementalDecoder dec(m, memory, batch.src_layout());
  double worst = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<int> tok(3);
    for (std::size_t b = 0; b < 3; ++b) tok[b] = batch.tgt_in[b * batch.tgt_len + t];
    const Tensor step = dec.step(tok);
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t k = 0; k < V; ++k)
        worst = std::max(worst, std::abs(step.at(b, k) - full.at(b * batch.tgt_len + t, k)));
  }
  return worst;
}

}  // namespace

TEST_CASE("incremental logits equal teacher-forced logits") {
  for (auto v : kVariants) {
    CAPTURE(to_string(v));
    CHECK(cache_gap(make(cfg(v)), 3, 10) < 1e-9);
    ModelConfig pre = cfg(v);
    pre.layout = Layout::pre_norm;
    CHECK(cache_gap(make(pre), 4, 10) < 1e-9);
  }
}

TEST_CASE("reordering rows follows the chosen parents") {
  const Model m = make(cfg(DecoderVariant::baseline));
  const std::vector<std::vector<int>> src = {{5, 6, 7, kEos}};
  Batch b = make_source_batch(src);
  const Tensor memory = encode(m, b);
  IncrementalDecoder two(m, memory, b.src_layout(), {0, 0});
  two.step(std::vector<int>{kBos, kBos});
  two.step(std::vector<int>{9, 11});
  two.reorder(std::vector<std::size_t>{1, 1, 0});
  CHECK(two.rows() == 3);
  const Tensor got = two.step(std::vector<int>{4, 4, 4});

  IncrementalDecoder ref(m, memory, b.src_layout());
  ref.step(std::vector<int>{kBos});
  ref.step(std::vector<int>{11});
  const Tensor want = ref.step(std::vector<int>{4});
  for (std::size_t k = 0; k < m.config.tgt_vocab; ++k) {
    CHECK(got.at(0, k) == want.at(0, k));
    CHECK(got.at(1, k) == want.at(0, k));
  }
}

TEST_CASE("average-attention state is constant in the position") {
  for (auto v : kVariants) {
    const Model m = make(cfg(v, 3));
    const std::vector<std::vector<int>> src = {{5, 6, kEos}};
    Batch b = make_source_batch(src);
    IncrementalDecoder dec(m, encode(m, b), b.src_layout());
    std::vector<std::size_t> sizes;
    for (int t = 0; t < 6; ++t) {
      dec.step(std::vector<int>{t == 0 ? kBos : 7});
      sizes.push_back(dec.state_size(0));
    }
    const bool averaging = v == DecoderVariant::matt || v == DecoderVariant::aan_original;
    if (averaging) {
      for (auto s : sizes) CHECK(s == 3 * m.config.dim);
    } else {
      for (std::size_t t = 0; t < sizes.size(); ++t) CHECK(sizes[t] == 3 * 2 * (t + 1) * m.config.dim);
    }
  }
}

TEST_CASE("length penalty") {
  CHECK(length_penalty(1, 0.0) == 1.0);
  CHECK(length_penalty(7, 1.0) == doctest::Approx(2.0));
  CHECK(length_penalty(10, 0.6) == doctest::Approx(std::pow(2.5, 0.6)));
  CHECK(hypothesis_score(-3.2, 9, 0.0) == -3.2);
  CHECK(max_decode_length(5) == 18);
}

TEST_CASE("beam search never scores below greedy") {
  Rng rng(8);
  for (auto v : kVariants) {
    const Model m = make(cfg(v), 11);
    for (int i = 0; i < 6; ++i) {
      const std::vector<int> src = random_symbols(rng, 3 + rng.below(5), 24);
      const std::vector<std::vector<int>> one = {src};
      for (double lp : {0.0, 0.6, 1.0}) {
        const Hypothesis g = greedy_decode(m, one, lp)[0];
        for (std::size_t beam : {1, 2, 4}) {
          const Hypothesis h = beam_search(m, src, beam, lp);
          CHECK(h.score >= g.score - 1e-12);
          CHECK(h.score == doctest::Approx(hypothesis_score(h.log_prob, h.length, lp)));
          CHECK(h.tokens.size() <= max_decode_length(src.size()));
        }
      }
    }
  }
}

TEST_CASE("greedy decoding of a batch equals decoding one at a time") {
  const Model m = make(cfg(DecoderVariant::matt));
  const std::vector<std::vector<int>> src = {{5, 6, 7}, {9}, {10, 11, 12, 13, 14}};
  const auto batch = greedy_decode(m, src);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::vector<std::vector<int>> one = {src[i]};
    const auto single = greedy_decode(m, one);
    CHECK(batch[i].tokens == single[0].tokens);
    CHECK(batch[i].log_prob == doctest::Approx(single[0].log_prob).epsilon(1e-12));
  }
}

TEST_CASE("out-of-vocabulary sources are rejected") {
  const Model m = make(cfg(DecoderVariant::matt));
  const std::vector<std::vector<int>> bad = {{5, 99}};
  CHECK_THROWS_AS(greedy_decode(m, bad), ParameterError);
}

TEST_CASE("per-step multiply-accumulate counts") {
  // Counted from the layer definitions for one decoder step at position t:
  // self-attention projects q, k, v and the output (4d^2) and touches t keys twice (2td);
  // cross-attention projects q and the output (2d^2) and touches S keys twice (2Sd);
  // the merged sublayer projects the averaged value (d^2) on top of the cross branch.
  for (std::size_t d : {16, 64, 512}) {
    ModelConfig b = cfg(DecoderVariant::baseline, 6);
    b.dim = d;
    b.ffn_dim = 4 * d;
    ModelConfig m = b;
    m.decoder = DecoderVariant::matt;
    const std::size_t S = 20, f = 4 * d, V = b.tgt_vocab;
    for (std::size_t t : {1, 5, 40}) {
      const std::size_t base = 6 * (4 * d * d + 2 * t * d + 2 * d * d + 2 * S * d + 2 * d * f) + d * V;
      const std::size_t matt = 6 * (d * d + 2 * d * d + 2 * S * d + 2 * d * f) + d * V;
      CHECK(decoder_step_macs(b, t, S) == base);
      CHECK(decoder_step_macs(m, t, S) == matt);
      CHECK(decoder_step_macs(m, t, S) < decoder_step_macs(b, t, S));
    }
  }
}

TEST_CASE("bench rows") {
  ModelConfig base = cfg(DecoderVariant::baseline, 2);
  const std::vector<DecoderVariant> variants = {DecoderVariant::baseline, DecoderVariant::baseline,
                                                DecoderVariant::matt};
  const std::vector<std::vector<int>> sources = {{5, 6, 7, 8}, {9, 10}};
  BenchOptions opt;
  opt.reps = 5;
  opt.warmup = 2;
  opt.train_reps = 1;
  opt.train_batch_tokens = 64;
  const auto rows = bench_decode(base, variants, sources, opt, 3);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].speedup_vs_baseline == 1.0);
  // Same variant twice: within a generous timer-noise band.
  CHECK(rows[1].speedup_vs_baseline > 0.5);
  CHECK(rows[1].speedup_vs_baseline < 2.0);
  CHECK(rows[2].params < rows[0].params);
  CHECK(rows[2].step_macs < rows[0].step_macs);
  for (const auto& r : rows) {
    CHECK(r.tokens_per_second > 0.0);
    CHECK(r.train_step_seconds > 0.0);
  }
  std::ostringstream os;
  write_bench_csv(os, rows);
  CHECK(os.str().rfind("variant,layers,tokens_per_second,speedup_vs_baseline,params,step_macs,train_step_seconds\n", 0) == 0);
}
