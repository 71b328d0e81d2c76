#include <doctest.h>

#include <cmath>

#include "deepnmt/gradcheck.hpp"
#include "deepnmt/kernels.hpp"
#include "deepnmt/layers.hpp"
#include "deepnmt/ops.hpp"

using namespace deepnmt;

namespace {

Tensor rand_t(Rng& rng, Shape shape, double scale = 1.0) { return uniform(rng, -scale, scale, shape); }

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j)
      for (std::size_t p = 0; p < a.dim(1); ++p) c.at(i, j) += a.at(i, p) * b.at(p, j);
  return c;
}

// Single sequence, explicit per-head scaled dot-product attention with loops.
Tensor naive_attention(const Tensor& x, const Tensor& y, const Tensor& wq, const Tensor& wk,
                       const Tensor& wv, std::size_t heads, bool causal) {
  const Tensor q = naive_matmul(x, wq), k = naive_matmul(y, wk), v = naive_matmul(y, wv);
  const std::size_t n = x.dim(0), m = y.dim(0), d = wq.dim(1), dh = d / heads;
  Tensor ctx({n, d});
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(m);
      double mx = -1e300;
      const std::size_t lim = causal ? i + 1 : m;
      for (std::size_t j = 0; j < lim; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < dh; ++c) dot += q.at(i, h * dh + c) * k.at(j, h * dh + c);
        s[j] = dot / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, s[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < lim; ++j) z += s[j] = std::exp(s[j] - mx);
      for (std::size_t j = 0; j < lim; ++j)
        for (std::size_t c = 0; c < dh; ++c) ctx.at(i, h * dh + c) += s[j] / z * v.at(j, h * dh + c);
    }
  return ctx;
}

Tensor run(const std::function<Var(Tape&)>& f) {
  Tape t;
  return t.value(f(t));
}

LayerNormVars ln_vars(Tape& t, const Tensor& g, const Tensor& b, double eps) {
  return {t.constant(g), t.constant(b), eps};
}

}  // namespace

TEST_CASE("layer norm values") {
  Tensor one({3}, 1.0), zero({3}, 0.0);
  Tensor out = run([&](Tape& t) {
    return layer_norm(t, t.constant(Tensor::matrix({{1, 2, 3}})), ln_vars(t, one, zero, 0.0));
  });
  const double s = std::sqrt(1.5);
  CHECK(out[0] == doctest::Approx(-s).epsilon(1e-12));
  CHECK(std::abs(out[1]) < 1e-15);
  CHECK(out[2] == doctest::Approx(s).epsilon(1e-12));

  // Already standardized input comes back nearly unchanged.
  Tensor z = Tensor::matrix({{-s, 0, s}});
  Tensor same = run([&](Tape& t) { return layer_norm(t, t.constant(z), ln_vars(t, one, zero, 1e-6)); });
  CHECK(max_abs_diff(same, z) < 1e-6);

  Tensor b2 = Tensor::vector({0.25, -4});
  Tensor flat = run([&](Tape& t) {
    return layer_norm(t, t.constant(Tensor::matrix({{5, 5}})), ln_vars(t, Tensor({2}, 1.0), b2, 1e-6));
  });
  CHECK(flat[0] == doctest::Approx(0.25));
  CHECK(flat[1] == doctest::Approx(-4));
}

TEST_CASE("layer norm output statistics") {
  Rng rng(13);
  for (std::size_t d : {2, 7, 64}) {
    Tensor x = rand_t(rng, {10, d}, 20.0);
    Tensor o = run([&](Tape& t) {
      return layer_norm(t, t.constant(x), ln_vars(t, Tensor({d}, 1.0), Tensor({d}, 0.0), 0.0));
    });
    for (std::size_t r = 0; r < 10; ++r) {
      double mean = 0.0, var = 0.0;
      for (double v : o.row(r)) mean += v;
      mean /= d;
      for (double v : o.row(r)) var += (v - mean) * (v - mean);
      var /= d;
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(var - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("layer norm backward matches the analytic Jacobian") {
  Rng rng(4);
  const std::size_t n = 5, d = 9;
  const double eps = 1e-6;
  Tensor x = rand_t(rng, {n, d}, 3.0);
  Tensor g = rand_t(rng, {d}, 2.0);
  Tensor b = rand_t(rng, {d});
  Tensor delta = rand_t(rng, {n, d});
  Tape t;
  Var xv = t.leaf(x);
  Var o = layer_norm(t, xv, ln_vars(t, g, b, eps));
  t.backward(ad::sum(t, ad::mul(t, o, t.constant(delta))));
  const Tensor& got = t.grad(xv);
  for (std::size_t r = 0; r < n; ++r) {
    double mean = 0.0, var = 0.0;
    for (double v : x.row(r)) mean += v;
    mean /= d;
    for (double v : x.row(r)) var += (v - mean) * (v - mean);
    var /= d;
    const double sigma = std::sqrt(var + eps);
    std::vector<double> xhat(d), gd(d);
    for (std::size_t i = 0; i < d; ++i) {
      xhat[i] = (x.at(r, i) - mean) / sigma;
      gd[i] = g[i] * delta.at(r, i);
    }
    // (1/sigma) (I - 11^T/d - xhat xhat^T/d) (g . delta)
    for (std::size_t i = 0; i < d; ++i) {
      double want = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double jac = (i == j ? 1.0 : 0.0) - 1.0 / d - xhat[i] * xhat[j] / d;
        want += jac * gd[j] / sigma;
      }
      CHECK(std::abs(got.at(r, i) - want) < 1e-8);
    }
  }
}

TEST_CASE("residual passes the upstream signal straight to its input") {
  Rng rng(1);
  Tensor x = rand_t(rng, {3, 4});
  Tensor up = rand_t(rng, {3, 4});
  Tape t;
  Var z = t.leaf(x);
  Var fz = ad::mul(t, z, t.constant(Tensor({3, 4}, 0.0)));
  t.backward(ad::sum(t, ad::mul(t, residual(t, z, fz), t.constant(up))));
  CHECK(max_abs_diff(t.grad(z), up) == 0.0);
}

TEST_CASE("feed-forward block") {
  Rng rng(6);
  const std::size_t d = 4, f = 6;
  Tensor x = rand_t(rng, {3, d});
  Tensor b2 = rand_t(rng, {d});
  auto eval = [&](const Tensor& w1, const Tensor& b1, const Tensor& w2) {
    return run([&](Tape& t) {
      return ffn(t, t.constant(x), {t.constant(w1), t.constant(b1), t.constant(w2), t.constant(b2)});
    });
  };
  auto rows_equal_b2 = [&](const Tensor& out) {
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < d; ++c) CHECK(out.at(r, c) == b2[c]);
  };
  rows_equal_b2(eval(Tensor({d, f}), Tensor({f}), Tensor({f, d})));
  // Every pre-activation negative: relu zeroes the hidden layer.
  rows_equal_b2(eval(rand_t(rng, {d, f}, 0.1), Tensor({f}, -10.0), rand_t(rng, {f, d})));

  Tensor w1 = rand_t(rng, {d, f}), b1 = rand_t(rng, {f}), w2 = rand_t(rng, {f, d});
  Tensor h = naive_matmul(x, w1);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < f; ++c) h.at(r, c) = std::max(0.0, h.at(r, c) + b1[c]);
  Tensor want = naive_matmul(h, w2);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < d; ++c) want.at(r, c) += b2[c];
  CHECK(max_abs_diff(eval(w1, b1, w2), want) < 1e-12);
}

TEST_CASE("attention matches the direct formula") {
  Rng rng(10);
  const std::size_t d = 6;
  Tensor x = rand_t(rng, {4, d}), y = rand_t(rng, {5, d});
  Tensor wq = rand_t(rng, {d, d}), wk = rand_t(rng, {d, d}), wv = rand_t(rng, {d, d}),
         wo = rand_t(rng, {d, d});
  for (std::size_t heads : {1, 2, 3}) {
    CAPTURE(heads);
    Tensor cross = run([&](Tape& t) {
      AttentionVars p{t.constant(wq), t.constant(wk), t.constant(wv), t.constant(wo), heads};
      return attention(t, t.constant(x), {1, 4, {}}, t.constant(y), {1, 5, {}}, p, {});
    });
    CHECK(max_abs_diff(cross, naive_matmul(naive_attention(x, y, wq, wk, wv, heads, false), wo)) < 1e-12);
    Tensor self = run([&](Tape& t) {
      AttentionVars p{t.constant(wq), t.constant(wk), t.constant(wv), t.constant(wo), heads};
      AttentionOptions o;
      o.causal = true;
      return attention_context(t, t.constant(x), {1, 4, {}}, t.constant(x), {1, 4, {}}, p, o);
    });
    CHECK(max_abs_diff(self, naive_attention(x, x, wq, wk, wv, heads, true)) < 1e-12);
  }
}

TEST_CASE("attention context rows are convex combinations of value rows") {
  Rng rng(12);
  const std::size_t d = 4;
  Tensor x = rand_t(rng, {3, d}), y = rand_t(rng, {6, d});
  Tensor eye({d, d});
  for (std::size_t i = 0; i < d; ++i) eye.at(i, i) = 1.0;
  Tensor ctx = run([&](Tape& t) {
    AttentionVars p{t.constant(rand_t(rng, {d, d}, 3.0)), t.constant(rand_t(rng, {d, d}, 3.0)),
                    t.constant(eye), t.constant(eye), 2};
    return attention_context(t, t.constant(x), {1, 3, {}}, t.constant(y), {1, 6, {}}, p, {});
  });
  for (std::size_t c = 0; c < d; ++c) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t j = 0; j < 6; ++j) {
      lo = std::min(lo, y.at(j, c));
      hi = std::max(hi, y.at(j, c));
    }
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(ctx.at(r, c) >= lo - 1e-12);
      CHECK(ctx.at(r, c) <= hi + 1e-12);
    }
  }
}

TEST_CASE("padded keys receive no attention") {
  Rng rng(15);
  const std::size_t d = 4;
  Tensor x = rand_t(rng, {2, d});
  Tensor y = rand_t(rng, {5, d});
  Tensor y2 = y;
  for (std::size_t c = 0; c < d; ++c) y2.at(4, c) = 100.0;
  Tensor w = rand_t(rng, {d, d});
  auto eval = [&](const Tensor& keys) {
    return run([&](Tape& t) {
      AttentionVars p{t.constant(w), t.constant(w), t.constant(w), t.constant(w), 2};
      return attention(t, t.constant(x), {1, 2, {}}, t.constant(keys), {1, 5, {4}}, p, {});
    });
  };
  CHECK(max_abs_diff(eval(y), eval(y2)) == 0.0);
}

TEST_CASE("average mask") {
  CHECK(average_mask(1) == Tensor::matrix({{1}}));
  Tensor m = average_mask(3);
  Tensor want = Tensor::matrix({{1, 0, 0}, {0.5, 0.5, 0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}});
  CHECK(max_abs_diff(m, want) == 0.0);
}

TEST_CASE("simplified average attention") {
  Rng rng(20);
  const std::size_t d = 5;
  Tensor wv = rand_t(rng, {d, d}), wo = rand_t(rng, {d, d});
  auto eval = [&](const Tensor& s, std::size_t batch, std::size_t len) {
    return run([&](Tape& t) {
      return saan(t, t.constant(s), {batch, len, {}}, {t.constant(wv), t.constant(wo)});
    });
  };
  Tensor s1 = rand_t(rng, {1, d});
  CHECK(max_abs_diff(eval(s1, 1, 1), naive_matmul(naive_matmul(s1, wv), wo)) < 1e-12);

  Tensor flat({4, d});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < d; ++c) flat.at(r, c) = 0.1 * c - 0.2;
  Tensor out = eval(flat, 1, 4);
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 0; c < d; ++c) CHECK(out.at(r, c) == doctest::Approx(out.at(0, c)).epsilon(1e-14));

  // Two sequences of length 3; cumulative means restart per sequence.
  Tensor s = rand_t(rng, {6, d});
  Tensor proj = naive_matmul(s, wv);
  Tensor avg({6, d});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t c = 0; c < d; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j <= i; ++j) acc += proj.at(b * 3 + j, c);
        avg.at(b * 3 + i, c) = acc / (i + 1);
      }
  CHECK(max_abs_diff(eval(s, 2, 3), naive_matmul(avg, wo)) < 1e-12);
}

TEST_CASE("causal sublayers ignore later positions") {
  Rng rng(30);
  const std::size_t d = 6, n = 5;
  Tensor w1 = rand_t(rng, {d, d}), w2 = rand_t(rng, {d, d}), w3 = rand_t(rng, {d, d}),
         w4 = rand_t(rng, {d, d});
  Tensor fw1 = rand_t(rng, {d, d}), fb1 = rand_t(rng, {d}), fw2 = rand_t(rng, {d, d}), fb2 = rand_t(rng, {d});
  Tensor gw = rand_t(rng, {2 * d, 2 * d}), gb = rand_t(rng, {2 * d});
  std::vector<std::pair<const char*, std::function<Tensor(const Tensor&)>>> fns = {
      {"saan",
       [&](const Tensor& s) {
         return run([&](Tape& t) { return saan(t, t.constant(s), {1, n, {}}, {t.constant(w1), t.constant(w2)}); });
       }},
      {"self attention",
       [&](const Tensor& s) {
         return run([&](Tape& t) {
           AttentionVars p{t.constant(w1), t.constant(w2), t.constant(w3), t.constant(w4), 2};
           AttentionOptions o;
           o.causal = true;
           return attention(t, t.constant(s), {1, n, {}}, t.constant(s), {1, n, {}}, p, o);
         });
       }},
      {"aan",
       [&](const Tensor& s) {
         return run([&](Tape& t) {
           AanVars p{{t.constant(fw1), t.constant(fb1), t.constant(fw2), t.constant(fb2)},
                     t.constant(gw), t.constant(gb)};
           return aan_original(t, t.constant(s), {1, n, {}}, p);
         });
       }},
  };
  for (auto& [name, f] : fns) {
    CAPTURE(name);
    Tensor s = rand_t(rng, {n, d});
    Tensor base = f(s);
    for (std::size_t t = 0; t < n; ++t) {
      Tensor changed = s;
      for (std::size_t r = t + 1; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) changed.at(r, c) += 5.0;
      Tensor out = f(changed);
      for (std::size_t r = 0; r <= t; ++r)
        for (std::size_t c = 0; c < d; ++c) CHECK(out.at(r, c) == base.at(r, c));
    }
  }
}

TEST_CASE("original average attention gates") {
  Rng rng(31);
  const std::size_t d = 4;
  Tensor s = rand_t(rng, {3, d});
  Tensor gb({2 * d});
  for (std::size_t i = 0; i < d; ++i) {
    gb[i] = 40.0;       // input gate open
    gb[d + i] = -40.0;  // forget gate closed
  }
  Tensor out = run([&](Tape& t) {
    AanVars p{{t.constant(rand_t(rng, {d, d})), t.constant(rand_t(rng, {d})),
               t.constant(rand_t(rng, {d, d})), t.constant(rand_t(rng, {d}))},
              t.constant(Tensor({2 * d, 2 * d})), t.constant(gb)};
    return aan_original(t, t.constant(s), {1, 3, {}}, p);
  });
  CHECK(max_abs_diff(out, s) < 1e-12);
}

TEST_CASE("merged attention is the shared projection of both branches") {
  Rng rng(40);
  const std::size_t d = 6;
  Tensor s = rand_t(rng, {4, d}), h = rand_t(rng, {3, d});
  Tensor sv = rand_t(rng, {d, d}), wq = rand_t(rng, {d, d}), wk = rand_t(rng, {d, d}),
         wv = rand_t(rng, {d, d}), wo = rand_t(rng, {d, d});
  Tensor got = run([&](Tape& t) {
    AttentionVars p{t.constant(wq), t.constant(wk), t.constant(wv), t.constant(wo), 2};
    return merged_attention(t, t.constant(s), {1, 4, {}}, t.constant(h), {1, 3, {}}, t.constant(sv), p, {});
  });
  Tensor avg = naive_matmul(average_mask(4), naive_matmul(s, sv));
  Tensor want = naive_matmul(avg + naive_attention(s, h, wq, wk, wv, 2, false), wo);
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("sublayer gradients match finite differences") {
  Rng rng(50);
  const std::size_t d = 8, n = 3;
  const Tensor c = rand_t(rng, {2 * n, d});
  const Tensor mem = rand_t(rng, {2 * 4, d});
  auto weighted = [&](Tape& t, Var y) { return ad::sum(t, ad::mul(t, y, t.constant(c))); };
  const SeqLayout sl{2, n, {3, 2}}, ml{2, 4, {4, 3}};
  std::vector<Tensor> w;
  for (int i = 0; i < 8; ++i) w.push_back(rand_t(rng, {d, d}));
  const Tensor b1 = rand_t(rng, {d}), b2 = rand_t(rng, {d}), g = rand_t(rng, {d}),
               gw = rand_t(rng, {2 * d, 2 * d}), gb = rand_t(rng, {2 * d});
  auto k = [](Tape& t, const Tensor& v) { return t.constant(v); };
  std::vector<std::pair<const char*, ScalarFn>> cases = {
      {"layer_norm", [&](Tape& t, Var x) { return weighted(t, layer_norm(t, x, {k(t, g), k(t, b1), 1e-6})); }},
      {"ffn", [&](Tape& t, Var x) { return weighted(t, ffn(t, x, {k(t, w[0]), k(t, b1), k(t, w[1]), k(t, b2)})); }},
      {"self_attention",
       [&](Tape& t, Var x) {
         AttentionOptions o;
         o.causal = true;
         AttentionVars p{k(t, w[0]), k(t, w[1]), k(t, w[2]), k(t, w[3]), 2};
         return weighted(t, attention(t, x, sl, x, sl, p, o));
       }},
      {"cross_attention",
       [&](Tape& t, Var x) {
         AttentionVars p{k(t, w[0]), k(t, w[1]), k(t, w[2]), k(t, w[3]), 2};
         return weighted(t, attention(t, x, sl, k(t, mem), ml, p, {}));
       }},
      {"saan", [&](Tape& t, Var x) { return weighted(t, saan(t, x, sl, {k(t, w[4]), k(t, w[5])})); }},
      {"merged",
       [&](Tape& t, Var x) {
         AttentionVars p{k(t, w[0]), k(t, w[1]), k(t, w[2]), k(t, w[3]), 2};
         return weighted(t, merged_attention(t, x, sl, k(t, mem), ml, k(t, w[4]), p, {}));
       }},
      {"aan_original",
       [&](Tape& t, Var x) {
         AanVars p{{k(t, w[6]), k(t, b1), k(t, w[7]), k(t, b2)}, k(t, gw), k(t, gb)};
         return weighted(t, aan_original(t, x, sl, p));
       }},
  };
  for (auto& [name, f] : cases) {
    CAPTURE(name);
    CHECK(grad_check(f, rand_t(rng, {2 * n, d}), 1e-6) < 1e-4);
  }
}

TEST_CASE("dropout") {
  Rng rng(60);
  Tensor x = rand_t(rng, {20, 10});
  auto apply = [&](double rate, Rng* r, Mode mode) {
    return run([&](Tape& t) { return dropout(t, t.constant(x), rate, r, mode); });
  };
  CHECK(apply(0.0, &rng, Mode::train) == x);
  CHECK(apply(0.5, &rng, Mode::eval) == x);
  CHECK_THROWS_AS(apply(1.0, &rng, Mode::train), ParameterError);

  const int trials = 4000;
  Tensor acc({20, 10});
  for (int i = 0; i < trials; ++i) acc += apply(0.3, &rng, Mode::train);
  acc *= 1.0 / trials;
  // Per entry the mean of the scaled Bernoulli mask has stddev sqrt(p/(1-p)/N) |x|.
  const double tol = 5.0 * std::sqrt(0.3 / 0.7 / trials);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(acc[i] - x[i]) <= tol * std::abs(x[i]) + 1e-12);
}

TEST_CASE("positional encoding") {
  Tensor pe = positional_encoding(3, 6);
  for (std::size_t c = 0; c < 6; ++c) CHECK(pe.at(0, c) == (c % 2 == 0 ? 0.0 : 1.0));
  CHECK(pe.at(2, 0) == std::sin(2.0));
  CHECK(pe.at(1, 3) == doctest::Approx(std::cos(1.0 / std::pow(10000.0, 2.0 / 6))));
  CHECK_THROWS_AS(positional_encoding(3, 5), ParameterError);
}
