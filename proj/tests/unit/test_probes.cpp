#include <doctest.h>

#include <cmath>
#include <sstream>

#include "deepnmt/probes.hpp"
#include "deepnmt/tasks.hpp"

using namespace deepnmt;

namespace {

ModelConfig cfg(DecoderVariant v, std::size_t layers, InitPolicy init = InitPolicy::glorot) {
  ModelConfig c;
  c.layers = layers;
  c.dim = 16;
  c.ffn_dim = 32;
  c.heads = 2;
  c.src_vocab = c.tgt_vocab = 20;
  c.decoder = v;
  c.init = init;
  return c;
}

Model make(const ModelConfig& c, std::uint64_t seed = 1) {
  Rng rng(seed);
  return build(c, rng);
}

Batch sample_batch(std::size_t tokens, std::uint64_t seed = 7) {
  TaskSpec task;
  task.vocab = 20;
  Rng rng(seed);
  return make_batch(sample_tokens(task, rng, tokens));
}

std::size_t count(const RatioReport& r, Stack s) {
  std::size_t n = 0;
  for (const auto& rec : r.records) n += rec.stack == s;
  return n;
}

}  // namespace

TEST_CASE("probe counts per stack") {
  CHECK(attach_probes(cfg(DecoderVariant::baseline, 6)) == 12 + 18);
  CHECK(attach_probes(cfg(DecoderVariant::matt, 6)) == 12 + 12);
  const Batch b = sample_batch(60);
  const RatioReport base = measure_ratios(make(cfg(DecoderVariant::baseline, 6)), b);
  CHECK(count(base, Stack::encoder) == 12);
  CHECK(count(base, Stack::decoder) == 18);
  const RatioReport matt = measure_ratios(make(cfg(DecoderVariant::matt, 6)), b);
  CHECK(count(matt, Stack::encoder) == 12);
  CHECK(count(matt, Stack::decoder) == 12);
}

TEST_CASE("pre-norm cannot be probed") {
  ModelConfig c = cfg(DecoderVariant::baseline, 2);
  c.layout = Layout::pre_norm;
  CHECK_THROWS_AS(attach_probes(c), UnsupportedLayoutError);
  CHECK_THROWS_AS(measure_ratios(make(c), sample_batch(40)), UnsupportedLayoutError);
}

TEST_CASE("ratio arithmetic") {
  ProbeRecord r;
  r.norm_z = 2.0;
  r.norm_r = 1.0;
  r.norm_o = 4.0;
  CHECK(r.beta_rc() == 2.0);
  CHECK(r.beta_ln() == 0.25);
  CHECK(r.beta() == 0.5);
}

TEST_CASE("product identity holds for every record") {
  for (auto v : {DecoderVariant::baseline, DecoderVariant::matt, DecoderVariant::matt_self,
                 DecoderVariant::aan_original}) {
    const RatioReport r = measure_ratios(make(cfg(v, 3)), sample_batch(120));
    for (const auto& rec : r.records) {
      CHECK(rec.norm_o > 0.0);
      CHECK(std::abs(rec.beta() - rec.beta_ln() * rec.beta_rc()) < 1e-9);
    }
  }
}

TEST_CASE("a block whose function is zero preserves the signal across the shortcut") {
  Model m = make(cfg(DecoderVariant::baseline, 3));
  m.params.at("enc.2.self.wo").fill(0.0);
  m.params.at("dec.3.ffn.w2").fill(0.0);
  m.params.at("dec.3.ffn.b2").fill(0.0);
  const RatioReport r = measure_ratios(m, sample_batch(80));
  int seen = 0;
  for (const auto& rec : r.records) {
    if ((rec.stack == Stack::encoder && rec.layer == 2 && rec.kind == Sublayer::self) ||
        (rec.stack == Stack::decoder && rec.layer == 3 && rec.kind == Sublayer::ffn)) {
      CHECK(rec.beta_rc() == 1.0);
      ++seen;
    }
  }
  CHECK(seen == 2);
}

TEST_CASE("a vanished output signal is reported") {
  Model m = make(cfg(DecoderVariant::matt, 2));
  m.params.at("dec.embed").fill(0.0);  // shared with the softmax matrix
  CHECK_THROWS_AS(measure_ratios(m, sample_batch(40)), DegenerateSignalError);
}

TEST_CASE("padding does not change probe readings") {
  const Model m = make(cfg(DecoderVariant::baseline, 2));
  TaskSpec task;
  task.vocab = 20;
  Rng rng(3);
  const auto pairs = sample_pairs(task, rng, 6);
  const Batch tight = make_batch(pairs);
  const Batch padded = make_batch(pairs, tight.src_len + 3, tight.tgt_len + 2);
  const RatioReport a = measure_ratios(m, tight), b = measure_ratios(m, padded);
  REQUIRE(a.records.size() == b.records.size());
  CHECK(std::abs(a.loss - b.loss) < 1e-10);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const double scale = std::max(1.0, a.records[i].norm_z);
    CHECK(std::abs(a.records[i].norm_z - b.records[i].norm_z) < 1e-10 * scale);
    CHECK(std::abs(a.records[i].norm_o - b.records[i].norm_o) < 1e-10 * scale);
    CHECK(std::abs(a.records[i].var_r - b.records[i].var_r) < 1e-10);
  }
}

TEST_CASE("cells average their records") {
  std::vector<ProbeRecord> recs;
  for (std::size_t l = 1; l <= 3; ++l) {
    ProbeRecord r;
    r.stack = Stack::decoder;
    r.layer = l;
    r.kind = Sublayer::cross;
    r.norm_o = 1.0;
    r.norm_r = static_cast<double>(l);
    r.norm_z = 2.0 * l;
    r.var_r = static_cast<double>(l * l);
    recs.push_back(r);
  }
  const auto cells = average_cells(recs);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].count == 3);
  CHECK(cells[0].beta_ln == doctest::Approx(2.0));
  CHECK(cells[0].beta_rc == doctest::Approx(2.0));
  CHECK(cells[0].beta == doctest::Approx(4.0));
  CHECK(cells[0].var_r == doctest::Approx(14.0 / 3));
}

TEST_CASE("layer gradient norms") {
  const Model one = make(cfg(DecoderVariant::matt, 1));
  const auto norms = layer_gradient_norms(one, sample_batch(60));
  REQUIRE(norms.size() == 2);
  CHECK(norms[0].stack == Stack::encoder);
  CHECK(norms[1].stack == Stack::decoder);
  for (const auto& n : norms) CHECK(n.norm > 0.0);

  // Grouping agrees with a direct sum of squares by name prefix.
  std::map<std::string, Tensor> grads = {{"enc.1.self.wq", Tensor::vector({3, 4})},
                                         {"enc.1.ffn.b1", Tensor::vector({12})},
                                         {"dec.1.ffn.w1", Tensor::vector({1})},
                                         {"dec.2.ffn.w1", Tensor::vector({2, 2})},
                                         {"dec.embed", Tensor::vector({100})}};
  const auto g = group_layer_norms(cfg(DecoderVariant::matt, 2), grads);
  REQUIRE(g.size() == 4);
  CHECK(g[0].norm == doctest::Approx(13.0));
  CHECK(g[1].norm == 0.0);
  CHECK(g[2].norm == doctest::Approx(1.0));
  CHECK(g[3].norm == doctest::Approx(std::sqrt(8.0)));

  const auto scaled = layer_gradient_norms(one, sample_batch(60), 0.1, 4.0);
  for (std::size_t i = 0; i < 2; ++i) CHECK(scaled[i].norm == doctest::Approx(4.0 * norms[i].norm));
}

TEST_CASE("dynamics windows") {
  DynamicsLog log(4, 50);
  std::vector<LayerGradNorm> step;
  for (std::size_t l = 1; l <= 4; ++l) {
    step.push_back({Stack::encoder, l, 0.5 * l});
    step.push_back({Stack::decoder, l, 3.0});
  }
  for (int i = 0; i < 120; ++i) log.add(step);
  log.flush();
  CHECK(log.windows() == 3);
  for (const auto& r : log.rows()) {
    if (r.stack == Stack::decoder) CHECK(r.norm == doctest::Approx(3.0).epsilon(1e-14));
    if (r.stack == Stack::encoder) CHECK(r.norm == doctest::Approx(0.5 * r.layer).epsilon(1e-14));
  }
  std::ostringstream os;
  write_dynamics_csv(os, log);
  CHECK(os.str().rfind("window,stack,layer,norm\n", 0) == 0);
}

TEST_CASE("ratio and gradient csv headers") {
  const Model m = make(cfg(DecoderVariant::baseline, 2));
  RatioReport r = measure_ratios(m, sample_batch(60));
  std::ostringstream a, b;
  write_ratios_csv(a, {{"glorot", r}});
  write_gradnorms_csv(b, {{"glorot", r}});
  const std::string ratios = a.str(), grads = b.str();
  CHECK(ratios.rfind("init,stack,sublayer,beta_ln,beta_rc,beta,var_r\n", 0) == 0);
  CHECK(grads.rfind("init,stack,layer,norm\n", 0) == 0);
  // enc self, enc ffn, dec self, dec cross, dec ffn
  CHECK(std::count(ratios.begin(), ratios.end(), '\n') == 1 + 5);
  CHECK(std::count(grads.begin(), grads.end(), '\n') == 1 + 4);
}

TEST_CASE("ds init lowers residual variance in a small deep model") {
  const Batch b = sample_batch(400);
  const RatioReport g = measure_ratios(make(cfg(DecoderVariant::baseline, 6)), b);
  const RatioReport d = measure_ratios(make(cfg(DecoderVariant::baseline, 6, InitPolicy::ds_init)), b);
  REQUIRE(g.cells.size() == d.cells.size());
  for (std::size_t i = 0; i < g.cells.size(); ++i) CHECK(d.cells[i].var_r < g.cells[i].var_r);
}
