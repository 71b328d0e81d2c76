#include "deepnmt/infer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "deepnmt/kernels.hpp"
#include "deepnmt/tasks.hpp"
#include "deepnmt/trainer.hpp"

namespace deepnmt {

namespace {

Tensor layer_norm_rows(const Tensor& x, const Tensor& g, const Tensor& b, double eps) {
  const std::size_t rows = x.rows(), d = x.cols();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xr[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    double* orow = out.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) orow[c] = (xr[c] - mean) * is * g[c] + b[c];
  }
  return out;
}

void add_bias_rows(Tensor& x, const Tensor& b) {
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* xr = x.data() + r * x.cols();
    for (std::size_t c = 0; c < x.cols(); ++c) xr[c] += b[c];
  }
}

Tensor ffn_rows(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                const Tensor& b2) {
  Tensor h = matmul(x, w1);
  add_bias_rows(h, b1);
  for (auto& v : h.values()) v = v < 0.0 ? 0.0 : v;
  Tensor out = matmul(h, w2);
  add_bias_rows(out, b2);
  return out;
}

/// Softmax attention of one query row over `n` key/value rows, per head.
void attend_row(const double* q, const double* keys, const double* values, std::size_t n,
                std::size_t d, std::size_t heads, double* out, std::vector<double>& scratch) {
  const std::size_t dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  scratch.resize(n);
  for (std::size_t h = 0; h < heads; ++h) {
    const double* qh = q + h * dh;
    for (std::size_t j = 0; j < n; ++j) {
      const double* kr = keys + j * d + h * dh;
      double s = 0.0;
      for (std::size_t c = 0; c < dh; ++c) s += qh[c] * kr[c];
      scratch[j] = s * sc;
    }
    softmax_inplace({scratch.data(), n});
    double* oh = out + h * dh;
    for (std::size_t j = 0; j < n; ++j) {
      const double p = scratch[j];
      if (p == 0.0) continue;
      const double* vr = values + j * d + h * dh;
      for (std::size_t c = 0; c < dh; ++c) oh[c] += p * vr[c];
    }
  }
}

}  // namespace

IncrementalDecoder::IncrementalDecoder(const Model& model, const Tensor& memory,
                                       const SeqLayout& src, std::vector<std::size_t> row_source)
    : model_(model), src_(src), row_source_(std::move(row_source)) {
  src_.validate();
  const ModelConfig& cfg = model.config;
  if (memory.rows() != src_.rows() || memory.cols() != cfg.dim) {
    throw DimensionError("decoder memory " + shape_str(memory.shape()) + " does not match " +
                         std::to_string(src_.rows()) + " source rows of width " +
                         std::to_string(cfg.dim));
  }
  if (row_source_.empty()) {
    row_source_.resize(src_.batch);
    std::iota(row_source_.begin(), row_source_.end(), std::size_t{0});
  }
  for (auto s : row_source_) {
    if (s >= src_.batch) throw ParameterError("row refers to source " + std::to_string(s) + " of " + std::to_string(src_.batch));
  }
  const std::string cross = cfg.decoder == DecoderVariant::baseline ? "cross" : "merged";
  layers_.resize(cfg.layers);
  for (std::size_t l = 1; l <= cfg.layers; ++l) {
    LayerCache& c = layers_[l - 1];
    c.cross_k = matmul(memory, w(param_name(Stack::decoder, l, cross, "wk")));
    c.cross_v = matmul(memory, w(param_name(Stack::decoder, l, cross, "wv")));
    c.k.resize(rows());
    c.v.resize(rows());
    c.sum = Tensor({rows(), cfg.dim});
  }
}

Tensor IncrementalDecoder::block(const Tensor& x, const std::string& ln_prefix,
                                 const std::function<Tensor(const Tensor&)>& f) const {
  const Tensor& g = w(ln_prefix + ".gain");
  const Tensor& b = w(ln_prefix + ".bias");
  const double eps = model_.config.ln_eps;
  if (model_.config.layout == Layout::post_norm) {
    Tensor r = x + f(x);
    return layer_norm_rows(r, g, b, eps);
  }
  return x + f(layer_norm_rows(x, g, b, eps));
}

Tensor IncrementalDecoder::cross_context(const Tensor& q, const LayerCache& c) const {
  const std::size_t d = model_.config.dim;
  Tensor ctx({rows(), d});
  std::vector<double> scratch;
  for (std::size_t r = 0; r < rows(); ++r) {
    const std::size_t s = row_source_[r];
    const std::size_t offset = s * src_.len * d;
    attend_row(q.data() + r * d, c.cross_k.data() + offset, c.cross_v.data() + offset,
               src_.length(s), d, model_.config.heads, ctx.data() + r * d, scratch);
  }
  return ctx;
}

Tensor IncrementalDecoder::self_context(const Tensor& z, std::size_t l, const std::string& prefix,
                                        LayerCache& c) {
  const std::size_t d = model_.config.dim;
  const std::string sub = model_.config.decoder == DecoderVariant::baseline ? "self" : "merged";
  Tensor q = matmul(z, w(param_name(Stack::decoder, l, sub, prefix + "wq")));
  Tensor k = matmul(z, w(param_name(Stack::decoder, l, sub, prefix + "wk")));
  Tensor v = matmul(z, w(param_name(Stack::decoder, l, sub, prefix + "wv")));
  Tensor ctx({rows(), d});
  std::vector<double> scratch;
  for (std::size_t r = 0; r < rows(); ++r) {
    c.k[r].insert(c.k[r].end(), k.data() + r * d, k.data() + (r + 1) * d);
    c.v[r].insert(c.v[r].end(), v.data() + r * d, v.data() + (r + 1) * d);
    attend_row(q.data() + r * d, c.k[r].data(), c.v[r].data(), t_, d, model_.config.heads,
               ctx.data() + r * d, scratch);
  }
  return ctx;
}

Tensor IncrementalDecoder::step(std::span<const int> tokens) {
  const ModelConfig& cfg = model_.config;
  const std::size_t d = cfg.dim;
  if (tokens.size() != rows()) {
    throw DimensionError("step got " + std::to_string(tokens.size()) + " tokens for " +
                         std::to_string(rows()) + " rows");
  }
  const Tensor& embed = w("dec.embed");
  const double scale = std::sqrt(static_cast<double>(d));
  const Tensor pe = positional_encoding(t_ + 1, d);
  Tensor x({rows(), d});
  for (std::size_t r = 0; r < rows(); ++r) {
    const int id = tokens[r];
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.tgt_vocab) {
      throw ParameterError("target token id " + std::to_string(id) + " outside vocabulary of " +
                           std::to_string(cfg.tgt_vocab));
    }
    for (std::size_t c = 0; c < d; ++c) {
      x.at(r, c) = embed.at(static_cast<std::size_t>(id), c) * scale + pe.at(t_, c);
    }
  }
  ++t_;
  const double inv_t = 1.0 / static_cast<double>(t_);
  for (std::size_t l = 1; l <= cfg.layers; ++l) {
    LayerCache& c = layers_[l - 1];
    auto name = [&](std::string_view sub, std::string_view m) {
      return param_name(Stack::decoder, l, sub, m);
    };
    auto ln = [&](std::string_view sub) {
      return "dec." + std::to_string(l) + "." + std::string(sub) + "_ln";
    };
    switch (cfg.decoder) {
      case DecoderVariant::baseline:
        x = block(x, ln("self"), [&](const Tensor& z) {
          return matmul(self_context(z, l, "", c), w(name("self", "wo")));
        });
        x = block(x, ln("cross"), [&](const Tensor& z) {
          return matmul(cross_context(matmul(z, w(name("cross", "wq"))), c), w(name("cross", "wo")));
        });
        break;
      case DecoderVariant::matt:
        x = block(x, ln("merged"), [&](const Tensor& z) {
          c.sum += matmul(z, w(name("merged", "saan_wv")));
          Tensor avg = c.sum * inv_t;
          Tensor ctx = cross_context(matmul(z, w(name("merged", "wq"))), c);
          return matmul(avg + ctx, w(name("merged", "wo")));
        });
        break;
      case DecoderVariant::matt_self:
        x = block(x, ln("merged"), [&](const Tensor& z) {
          Tensor a = self_context(z, l, "self_", c);
          Tensor b = cross_context(matmul(z, w(name("merged", "wq"))), c);
          return matmul(a + b, w(name("merged", "wo")));
        });
        break;
      case DecoderVariant::aan_original:
        x = block(x, ln("merged"), [&](const Tensor& z) {
          c.sum += z;
          Tensor avg = c.sum * inv_t;
          Tensor g = ffn_rows(avg, w(name("merged", "aan_w1")), w(name("merged", "aan_b1")),
                              w(name("merged", "aan_w2")), w(name("merged", "aan_b2")));
          Tensor cat({rows(), 2 * d});
          for (std::size_t r = 0; r < rows(); ++r) {
            std::copy_n(z.data() + r * d, d, cat.data() + r * 2 * d);
            std::copy_n(g.data() + r * d, d, cat.data() + r * 2 * d + d);
          }
          Tensor gates = matmul(cat, w(name("merged", "gate_w")));
          add_bias_rows(gates, w(name("merged", "gate_b")));
          Tensor a({rows(), d});
          for (std::size_t r = 0; r < rows(); ++r) {
            for (std::size_t k = 0; k < d; ++k) {
              const double ig = 1.0 / (1.0 + std::exp(-gates.at(r, k)));
              const double fg = 1.0 / (1.0 + std::exp(-gates.at(r, d + k)));
              a.at(r, k) = ig * z.at(r, k) + fg * g.at(r, k);
            }
          }
          Tensor b = matmul(cross_context(matmul(z, w(name("merged", "wq"))), c),
                            w(name("merged", "wo")));
          return a + b;
        });
        break;
    }
    x = block(x, ln("ffn"), [&](const Tensor& z) {
      return ffn_rows(z, w(name("ffn", "w1")), w(name("ffn", "b1")), w(name("ffn", "w2")),
                      w(name("ffn", "b2")));
    });
  }
  if (cfg.layout == Layout::pre_norm) {
    x = layer_norm_rows(x, w("dec.final_ln.gain"), w("dec.final_ln.bias"), cfg.ln_eps);
  }
  return matmul_nt(x, w("dec.softmax"));
}

void IncrementalDecoder::reorder(std::span<const std::size_t> parents) {
  const std::size_t d = model_.config.dim;
  for (auto p : parents) {
    if (p >= rows()) throw ParameterError("reorder: parent row " + std::to_string(p) + " out of range");
  }
  std::vector<std::size_t> sources;
  for (auto p : parents) sources.push_back(row_source_[p]);
  for (auto& c : layers_) {
    std::vector<std::vector<double>> k, v;
    Tensor sum({std::max<std::size_t>(parents.size(), 1), d});
    for (std::size_t i = 0; i < parents.size(); ++i) {
      k.push_back(c.k[parents[i]]);
      v.push_back(c.v[parents[i]]);
      std::copy_n(c.sum.data() + parents[i] * d, d, sum.data() + i * d);
    }
    c.k = std::move(k);
    c.v = std::move(v);
    c.sum = std::move(sum);
  }
  row_source_ = std::move(sources);
}

std::size_t IncrementalDecoder::state_size(std::size_t row) const {
  std::size_t n = 0;
  const bool running = model_.config.decoder == DecoderVariant::matt ||
                       model_.config.decoder == DecoderVariant::aan_original;
  for (const auto& c : layers_) {
    n += c.k[row].size() + c.v[row].size();
    if (running) n += model_.config.dim;
  }
  return n;
}

// ----------------------------------------------------------------- search

double length_penalty(std::size_t length, double alpha) {
  return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

double hypothesis_score(double log_prob, std::size_t length, double alpha) {
  return log_prob / length_penalty(length, alpha);
}

std::size_t max_decode_length(std::size_t source_len) { return 2 * source_len + 8; }

namespace {

void log_softmax_row(const double* z, std::size_t n, std::vector<double>& out) {
  out.assign(z, z + n);
  const double mx = *std::max_element(out.begin(), out.end());
  double s = 0.0;
  for (double v : out) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  for (auto& v : out) v -= lse;
}

std::vector<std::vector<int>> with_eos(std::span<const std::vector<int>> sources) {
  std::vector<std::vector<int>> out;
  for (const auto& s : sources) {
    out.push_back(s);
    out.back().push_back(kEos);
  }
  return out;
}

struct Encoded {
  Batch batch;
  Tensor memory;
};

Encoded encode_sources(const Model& model, std::span<const std::vector<int>> sources) {
  auto full = with_eos(sources);
  for (const auto& s : full) {
    for (int id : s) {
      if (id < 0 || static_cast<std::size_t>(id) >= model.config.src_vocab) {
        throw ParameterError("source token id " + std::to_string(id) + " outside vocabulary of " +
                             std::to_string(model.config.src_vocab));
      }
    }
  }
  Encoded e{make_source_batch(full), {}};
  e.memory = encode(model, e.batch);
  return e;
}

}  // namespace

std::vector<Hypothesis> greedy_decode(const Model& model,
                                      std::span<const std::vector<int>> sources,
                                      double len_penalty) {
  if (sources.empty()) return {};
  Encoded enc = encode_sources(model, sources);
  IncrementalDecoder dec(model, enc.memory, enc.batch.src_layout());
  const std::size_t n = sources.size();
  std::vector<Hypothesis> hyps(n);
  std::vector<int> last(n, kBos);
  std::vector<bool> done(n, false);
  std::size_t cap = 0;
  for (const auto& s : sources) cap = std::max(cap, max_decode_length(s.size()));
  std::vector<double> lp;
  for (std::size_t t = 0; t < cap; ++t) {
    if (std::all_of(done.begin(), done.end(), [](bool b) { return b; })) break;
    Tensor logits = dec.step(last);
    const std::size_t V = logits.cols();
    for (std::size_t r = 0; r < n; ++r) {
      if (done[r]) continue;
      log_softmax_row(logits.data() + r * V, V, lp);
      const int best = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
      Hypothesis& h = hyps[r];
      h.log_prob += lp[static_cast<std::size_t>(best)];
      h.length += 1;
      last[r] = best;
      if (best == kEos) {
        h.finished = true;
        done[r] = true;
      } else {
        h.tokens.push_back(best);
        if (h.length >= max_decode_length(sources[r].size())) done[r] = true;
      }
    }
  }
  for (auto& h : hyps) h.score = hypothesis_score(h.log_prob, h.length, len_penalty);
  return hyps;
}

Hypothesis beam_search(const Model& model, const std::vector<int>& source, std::size_t beam,
                       double len_penalty) {
  if (beam < 1) throw ParameterError("beam must be >= 1");
  const std::vector<int> one[] = {source};
  Encoded enc = encode_sources(model, one);
  IncrementalDecoder dec(model, enc.memory, enc.batch.src_layout());
  const std::size_t cap = max_decode_length(source.size());

  std::vector<Hypothesis> alive(1), finished;
  std::vector<double> lp;
  struct Cand {
    double log_prob;
    std::size_t parent;
    int token;
  };
  while (!alive.empty()) {
    std::vector<int> last;
    for (const auto& h : alive) last.push_back(h.tokens.empty() ? kBos : h.tokens.back());
    Tensor logits = dec.step(last);
    const std::size_t V = logits.cols();
    std::vector<Cand> cands;
    for (std::size_t r = 0; r < alive.size(); ++r) {
      log_softmax_row(logits.data() + r * V, V, lp);
      for (std::size_t v = 0; v < V; ++v) {
        cands.push_back({alive[r].log_prob + lp[v], r, static_cast<int>(v)});
      }
    }
    const std::size_t slots = beam - finished.size();
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(std::min(slots, cands.size())),
                      cands.end(), [](const Cand& a, const Cand& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next;
    std::vector<std::size_t> parents;
    for (std::size_t i = 0; i < std::min(slots, cands.size()); ++i) {
      const Cand& c = cands[i];
      Hypothesis h = alive[c.parent];
      h.log_prob = c.log_prob;
      h.length += 1;
      if (c.token == kEos) {
        h.finished = true;
        h.score = hypothesis_score(h.log_prob, h.length, len_penalty);
        finished.push_back(std::move(h));
        continue;
      }
      h.tokens.push_back(c.token);
      if (h.length >= cap) {
        h.score = hypothesis_score(h.log_prob, h.length, len_penalty);
        finished.push_back(std::move(h));
        continue;
      }
      next.push_back(std::move(h));
      parents.push_back(c.parent);
    }
    alive = std::move(next);
    if (!alive.empty()) dec.reorder(parents);
  }
  auto best = std::max_element(finished.begin(), finished.end(),
                               [](const Hypothesis& a, const Hypothesis& b) { return a.score < b.score; });
  Hypothesis out = *best;
  for (auto& h : finished) {
    if (h.score > out.score) out = h;
  }
  if (beam > 1) {
    Hypothesis greedy = greedy_decode(model, one, len_penalty).front();
    if (greedy.score > out.score) out = std::move(greedy);
  }
  return out;
}

// ------------------------------------------------------------------ bench

EvalStats evaluate(const Model& model, std::span<const SequencePair> pairs,
                   std::size_t batch_tokens) {
  EvalStats e;
  if (pairs.empty()) return e;
  std::size_t correct = 0, total = 0;
  for (const Batch& b : make_batches(pairs, batch_tokens)) {
    correct += correct_tokens(decode_train(model, b), b.tgt_out);
    total += b.target_tokens();
  }
  e.token_acc = static_cast<double>(correct) / static_cast<double>(total);

  std::vector<std::vector<int>> sources;
  for (const auto& p : pairs) sources.emplace_back(p.source.begin(), p.source.end() - 1);
  std::size_t exact = 0;
  const std::size_t chunk = 64;
  for (std::size_t i = 0; i < sources.size(); i += chunk) {
    const std::size_t n = std::min(chunk, sources.size() - i);
    const auto hyps = greedy_decode(model, std::span(sources).subspan(i, n));
    for (std::size_t j = 0; j < n; ++j) {
      const auto& tgt = pairs[i + j].target;
      exact += hyps[j].finished &&
               std::equal(hyps[j].tokens.begin(), hyps[j].tokens.end(), tgt.begin(), tgt.end() - 1);
    }
  }
  e.exact_match = static_cast<double>(exact) / static_cast<double>(pairs.size());
  return e;
}

std::size_t decoder_step_macs(const ModelConfig& cfg, std::size_t t, std::size_t src_len) {
  const std::size_t d = cfg.dim;
  const std::size_t ffn = 2 * d * cfg.ffn_dim;
  const std::size_t cross = 2 * d * d + 2 * src_len * d;  // W_q, W_o, scores, mix
  std::size_t per_layer = 0;
  switch (cfg.decoder) {
    case DecoderVariant::baseline:
      per_layer = 4 * d * d + 2 * t * d + cross;
      break;
    case DecoderVariant::matt:
      per_layer = d * d + cross;  // W_v of the averaging branch; the mean is additions only
      break;
    case DecoderVariant::matt_self:
      per_layer = 3 * d * d + 2 * t * d + cross;
      break;
    case DecoderVariant::aan_original:
      per_layer = 2 * d * cfg.aan_inner() + 4 * d * d + 2 * d + cross;
      break;
  }
  return cfg.layers * (per_layer + ffn) + d * cfg.tgt_vocab;
}

double time_decode(const Model& model, std::span<const std::vector<int>> sources) {
  Encoded enc = encode_sources(model, sources);
  std::size_t longest = 0;
  for (const auto& s : sources) longest = std::max(longest, s.size());
  const std::size_t steps = max_decode_length(longest);
  const auto t0 = std::chrono::steady_clock::now();
  IncrementalDecoder dec(model, enc.memory, enc.batch.src_layout());
  std::vector<int> last(sources.size(), kBos);
  for (std::size_t s = 0; s < steps; ++s) {
    Tensor logits = dec.step(last);
    const std::size_t V = logits.cols();
    for (std::size_t r = 0; r < last.size(); ++r) {
      const double* z = logits.data() + r * V;
      last[r] = static_cast<int>(std::max_element(z, z + V) - z);
    }
  }
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<BenchRow> bench_decode(const ModelConfig& base, std::span<const DecoderVariant> variants,
                                   std::span<const std::vector<int>> sources,
                                   const BenchOptions& options, std::uint64_t seed) {
  if (options.reps < 1) throw ParameterError("bench needs reps >= 1");
  if (sources.empty()) throw ParameterError("bench needs at least one source");
  std::size_t longest = 0, total_len = 0;
  for (const auto& s : sources) {
    longest = std::max(longest, s.size());
    total_len += s.size() + 1;
  }
  const std::size_t steps = max_decode_length(longest);
  const Rng root(seed);

  std::vector<Model> models;
  std::vector<BenchRow> rows;
  for (DecoderVariant v : variants) {
    ModelConfig cfg = base;
    cfg.decoder = v;
    Rng init = root.fork(0);
    models.push_back(build(cfg, init));
    BenchRow row;
    row.variant = v;
    row.layers = cfg.layers;
    row.params = count_params(models.back().params);
    double macs = 0.0;
    const std::size_t mean_src = total_len / sources.size();
    for (std::size_t t = 1; t <= steps; ++t) macs += static_cast<double>(decoder_step_macs(cfg, t, mean_src));
    row.step_macs = macs / static_cast<double>(steps);
    rows.push_back(row);
  }

  // Round-robin over variants inside each rep, so slow drift in machine speed
  // lands on every variant alike instead of on whichever ran last.
  for (std::size_t i = 0; i < options.warmup; ++i)
    for (const Model& m : models) time_decode(m, sources);
  std::vector<std::vector<double>> times(models.size());
  for (std::size_t i = 0; i < options.reps; ++i)
    for (std::size_t k = 0; k < models.size(); ++k) times[k].push_back(time_decode(models[k], sources));
  for (std::size_t k = 0; k < models.size(); ++k)
    rows[k].tokens_per_second = static_cast<double>(steps * sources.size()) / median(times[k]);

  if (options.train_reps > 0) {
    for (std::size_t k = 0; k < models.size(); ++k) {
      const ModelConfig& cfg = models[k].config;
      TaskSpec task;
      task.vocab = std::min(cfg.src_vocab, cfg.tgt_vocab);
      BatchStream stream(task, options.train_batch_tokens, root.fork(1));
      const Batch batch = stream.next();
      std::vector<double> train_times;
      for (std::size_t i = 0; i < options.train_reps + 1; ++i) {
        std::map<std::string, Tensor> grads;
        const auto t0 = std::chrono::steady_clock::now();
        compute_gradients(models[k], batch, 0.1, nullptr, grads);
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (i > 0) train_times.push_back(s);  // first pass warms the allocator
      }
      rows[k].train_step_seconds = median(train_times);
    }
  }
  double base_tps = 0.0;
  for (const auto& r : rows) {
    if (r.variant == DecoderVariant::baseline) {
      base_tps = r.tokens_per_second;
      break;
    }
  }
  for (auto& r : rows) {
    r.speedup_vs_baseline = base_tps > 0.0 ? r.tokens_per_second / base_tps : 0.0;
  }
  return rows;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "variant,layers,tokens_per_second,speedup_vs_baseline,params,step_macs,train_step_seconds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6g,%.6g,%zu,%.10g,%.6g\n",
                  std::string(to_string(r.variant)).c_str(), r.layers, r.tokens_per_second,
                  r.speedup_vs_baseline, r.params, r.step_macs, r.train_step_seconds);
    os << buf;
  }
}

}  // namespace deepnmt
