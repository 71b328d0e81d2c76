#include <doctest.h>

#include <cmath>
#include <numeric>

#include "deepnmt/gradcheck.hpp"
#include "deepnmt/layers.hpp"
#include "deepnmt/model.hpp"
#include "deepnmt/ops.hpp"

using namespace deepnmt;

namespace {

ModelConfig small(DecoderVariant v = DecoderVariant::baseline, std::size_t layers = 2) {
  ModelConfig c;
  c.layers = layers;
  c.dim = 8;
  c.ffn_dim = 12;
  c.heads = 2;
  c.src_vocab = c.tgt_vocab = 16;
  c.decoder = v;
  return c;
}

Model make(const ModelConfig& c, std::uint64_t seed = 1) {
  Rng rng(seed);
  return build(c, rng);
}

Batch two_pairs() {
  std::vector<SequencePair> pairs = {{{3, 4, 5, 2}, {6, 7, 2}}, {{8, 9, 2}, {10, 11, 12, 13, 2}}};
  return make_batch(pairs);
}

constexpr DecoderVariant kVariants[] = {DecoderVariant::baseline, DecoderVariant::matt,
                                        DecoderVariant::matt_self, DecoderVariant::aan_original};

// Row-wise standardization with population variance.
Tensor standardize(const Tensor& x, double eps) {
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0.0, var = 0.0;
    for (double v : x.row(r)) mean += v;
    mean /= x.cols();
    for (double v : x.row(r)) var += (v - mean) * (v - mean);
    var /= x.cols();
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = (x.at(r, c) - mean) / std::sqrt(var + eps);
  }
  return out;
}

}  // namespace

TEST_CASE("config validation names the key") {
  auto bad = [](auto mutate, const char* key) {
    ModelConfig c = small();
    mutate(c);
    try {
      c.validate();
      FAIL("expected ConfigError for " << key);
    } catch (const ConfigError& e) {
      CHECK(e.key() == key);
    }
  };
  bad([](ModelConfig& c) { c.layers = 0; }, "layers");
  bad([](ModelConfig& c) { c.dim = 7; }, "dim");
  bad([](ModelConfig& c) { c.heads = 3; }, "heads");
  bad([](ModelConfig& c) { c.alpha = 1.5; }, "alpha");
  bad([](ModelConfig& c) { c.dp_r = 1.0; }, "dp_r");
}

TEST_CASE("config key-value round trip") {
  ModelConfig c = small(DecoderVariant::matt_self, 3);
  c.layout = Layout::pre_norm;
  c.init = InitPolicy::ds_init;
  c.alpha = 0.3;
  c.ds_encoder = false;
  c.dp_a = 0.05;
  ModelConfig back = ModelConfig::from_kv(c.to_kv());
  CHECK(back.to_kv() == c.to_kv());
  CHECK(back.alpha == c.alpha);
  auto kv = c.to_kv();
  kv["bogus"] = "1";
  CHECK_THROWS_AS(ModelConfig::from_kv(kv), ConfigError);
}

TEST_CASE("ds init with one layer matches glorot under the same seed") {
  ModelConfig g = small(DecoderVariant::matt, 1);
  ModelConfig d = g;
  d.init = InitPolicy::ds_init;
  Model a = make(g, 5), b = make(d, 5);
  for (const auto& name : a.params.names()) {
    CAPTURE(name);
    CHECK(a.params.at(name) == b.params.at(name));
  }
}

TEST_CASE("ds init bounds read back from build metadata") {
  ModelConfig c = small(DecoderVariant::baseline, 6);
  c.init = InitPolicy::ds_init;
  c.alpha = 0.8;
  Model m = make(c);
  for (std::size_t l = 1; l <= 6; ++l) {
    for (const char* name : {"enc.%.self.wq", "enc.%.ffn.w1", "dec.%.cross.wo", "dec.%.ffn.w2"}) {
      std::string n = name;
      n.replace(n.find('%'), 1, std::to_string(l));
      const InitRecord& rec = m.params.init(n);
      const Tensor& w = m.params.at(n);
      const double g = glorot_bound(w.dim(0), w.dim(1));
      CHECK(rec.layer == l);
      CHECK(rec.bound == doctest::Approx(g * 0.8 / std::sqrt(static_cast<double>(l))).epsilon(1e-15));
      for (double v : w.values()) REQUIRE(std::abs(v) <= rec.bound);
    }
  }
}

TEST_CASE("shared target softmax aliases the embedding") {
  Model m = make(small());
  CHECK(m.params.is_alias("dec.softmax"));
  m.params.at("dec.softmax")[3] = 42.0;
  CHECK(m.params.at("dec.embed")[3] == 42.0);
  // Copies do not share storage with the original.
  Model copy = m;
  copy.params.at("dec.embed")[3] = -1.0;
  CHECK(m.params.at("dec.embed")[3] == 42.0);
  CHECK(copy.params.at("dec.softmax")[3] == -1.0);

  ModelConfig c = small();
  c.share_target_softmax = false;
  Model u = make(c);
  CHECK_FALSE(u.params.is_alias("dec.softmax"));
}

TEST_CASE("decoder attention parameter counts") {
  for (std::size_t d : {8, 512}) {
    ModelConfig c = small(DecoderVariant::baseline, 1);
    c.dim = d;
    c.heads = 8;
    c.ffn_dim = 4;
    c.src_vocab = c.tgt_vocab = 4;
    const std::size_t base = decoder_attention_params(make(c), 1);
    c.decoder = DecoderVariant::matt;
    const std::size_t matt = decoder_attention_params(make(c), 1);
    CHECK(base == 8 * d * d);
    CHECK(matt == 5 * d * d);
    c.decoder = DecoderVariant::aan_original;
    // The AAN branch alone: FFN (2d^2 + 2d) plus gates (4d^2 + 2d), more than SAAN's 2d^2.
    const std::size_t aan = decoder_attention_params(make(c), 1) - 4 * d * d;
    CHECK(aan == 6 * d * d + 4 * d);
    CHECK(aan > 2 * d * d);
  }
  ModelConfig c6 = small(DecoderVariant::baseline, 6);
  ModelConfig m6 = small(DecoderVariant::matt, 6);
  for (std::size_t l = 1; l <= 6; ++l) {
    CHECK(decoder_attention_params(make(c6), l) - decoder_attention_params(make(m6), l) == 3 * 8 * 8);
  }
  CHECK(count_params(Parameters{}) == 0);
}

TEST_CASE("known attention counts at d=512") {
  ModelConfig c;
  c.layers = 1;
  c.dim = 512;
  c.heads = 8;
  c.ffn_dim = 2;
  c.src_vocab = c.tgt_vocab = 4;
  CHECK(decoder_attention_params(make(c), 1) == 2097152);
  c.decoder = DecoderVariant::matt;
  CHECK(decoder_attention_params(make(c), 1) == 1310720);
}

TEST_CASE("layer norms per decoder layer") {
  auto count_ln = [](const Model& m) {
    std::size_t n = 0;
    for (const auto& name : m.params.names())
      if (name.starts_with("dec.1.") && name.ends_with("_ln.gain")) ++n;
    return n;
  };
  CHECK(count_ln(make(small(DecoderVariant::baseline))) == 3);
  CHECK(count_ln(make(small(DecoderVariant::matt))) == 2);
}

TEST_CASE("zero weights collapse an encoder layer to a chain of layer norms") {
  ModelConfig c = small(DecoderVariant::baseline, 1);
  Model m = make(c);
  for (const auto& name : m.params.storage_names()) {
    if (name.starts_with("enc.1.") && !name.ends_with(".gain")) m.params.at(name).fill(0.0);
  }
  std::vector<SequencePair> pairs = {{{3, 9, 4, 2}, {3, 2}}};
  Batch b = make_batch(pairs);
  Tensor h0({4, c.dim});
  const Tensor pe = positional_encoding(4, c.dim);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < c.dim; ++j)
      h0.at(i, j) = m.params.at("enc.embed").at(b.src[i], j) * std::sqrt(8.0) + pe.at(i, j);
  Tensor want = standardize(standardize(h0, c.ln_eps), c.ln_eps);
  CHECK(max_abs_diff(encode(m, b), want) < 1e-12);
}

TEST_CASE("unmasked encoder layer is permutation equivariant") {
  Rng rng(3);
  const std::size_t d = 8, n = 5;
  std::vector<Tensor> w;
  for (int i = 0; i < 6; ++i) w.push_back(uniform(rng, -0.5, 0.5, {d, d}));
  const Tensor b = uniform(rng, -0.5, 0.5, {d}), one({d}, 1.0), zero({d}, 0.0);
  auto layer = [&](const Tensor& x) {
    Tape t;
    auto k = [&](const Tensor& v) { return t.constant(v); };
    Var h = t.constant(x);
    AttentionVars a{k(w[0]), k(w[1]), k(w[2]), k(w[3]), 2};
    h = layer_norm(t, residual(t, h, attention(t, h, {1, n, {}}, h, {1, n, {}}, a, {})),
                   {k(one), k(zero), 1e-6});
    h = layer_norm(t, residual(t, h, ffn(t, h, {k(w[4]), k(b), k(w[5]), k(b)})), {k(one), k(zero), 1e-6});
    return t.value(h);
  };
  const Tensor x = uniform(rng, -1, 1, {n, d});
  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  Tensor px({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) px.at(i, j) = x.at(perm[i], j);
  const Tensor y = layer(x), py = layer(px);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(py.at(i, j) - y.at(perm[i], j)) < 1e-12);
}

TEST_CASE("decoder logits are causal in the target input") {
  for (auto v : kVariants) {
    for (auto layout : {Layout::post_norm, Layout::pre_norm}) {
      ModelConfig c = small(v);
      c.layout = layout;
      CAPTURE(to_string(v));
      Model m = make(c, 9);
      Batch b = two_pairs();
      const Tensor base = decode_train(m, b);
      const std::size_t T = b.tgt_len;
      for (std::size_t t = 1; t < T; ++t) {
        Batch changed = b;
        changed.tgt_in[1 * T + t] = 14;  // second sequence
        const Tensor out = decode_train(m, changed);
        for (std::size_t pos = 0; pos < t; ++pos)
          for (std::size_t k = 0; k < c.tgt_vocab; ++k) CHECK(out.at(T + pos, k) == base.at(T + pos, k));
        double moved = 0.0;
        for (std::size_t k = 0; k < c.tgt_vocab; ++k) moved += std::abs(out.at(T + t, k) - base.at(T + t, k));
        CHECK(moved > 0.0);
        // The other sequence is untouched.
        for (std::size_t r = 0; r < T; ++r)
          for (std::size_t k = 0; k < c.tgt_vocab; ++k) CHECK(out.at(r, k) == base.at(r, k));
      }
    }
  }
}

TEST_CASE("full model parameter gradients match finite differences") {
  Batch b = two_pairs();
  for (auto v : kVariants) {
    for (auto layout : {Layout::post_norm, Layout::pre_norm}) {
      ModelConfig c = small(v);
      c.layout = layout;
      c.init = InitPolicy::ds_init;
      Model m = make(c, 4);
      Tape t;
      ParamBinder p(t, m.params);
      t.backward(batch_loss(t, p, m, b, 0.1, {}));
      auto grads = t.param_grads();
      for (const std::string name : {std::string("dec.2.ffn.w1"), std::string("enc.1.self.wk"),
                                     std::string("dec.embed"), std::string("dec.1.ffn_ln.gain")}) {
        CAPTURE(to_string(v));
        CAPTURE(name);
        Tensor& x = m.params.at(name);
        GradCheckOptions o;
        o.max_coords = 24;
        CHECK(grad_check_inplace([&] { return batch_loss(m, b, 0.1); }, x, grads.at(name), 1e-6, o) < 1e-4);
      }
    }
  }
}

TEST_CASE("forward contracts") {
  Model m = make(small());
  Batch b = two_pairs();
  b.src[0] = 99;
  CHECK_THROWS_AS(batch_loss(m, b, 0.1), ParameterError);

  Batch ok = two_pairs();
  Tape t;
  ParamBinder p(t, m.params);
  ForwardOptions train;
  train.mode = Mode::train;
  CHECK_THROWS_AS(batch_loss(t, p, m, ok, 0.1, train), ContractError);
}

TEST_CASE("token accuracy ignores padding") {
  Tensor logits = Tensor::matrix({{0, 1, 0}, {1, 0, 0}, {0, 0, 1}});
  std::vector<int> gold = {1, 2, 0};
  CHECK(token_accuracy(logits, gold) == 0.5);
  CHECK(correct_tokens(logits, gold) == 1);
}
