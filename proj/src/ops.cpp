#include "deepnmt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deepnmt/kernels.hpp"

namespace deepnmt::ad {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

Shape mat_shape(std::size_t r, std::size_t c) { return {r, c}; }

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (bv.rank() != 2 || av.cols() != bv.rows()) {
    throw DimensionError("matmul shape mismatch: " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
  }
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  Tensor out(mat_shape(n, m));
  gemm(av.data(), bv.data(), out.data(), n, k, m);
  return t.record(
      std::move(out), {a, b},
      [a, b, n, k, m](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        if (Tensor* ga = tp.grad_slot(a)) gemm_nt(g.data(), tp.value(b).data(), ga->data(), n, m, k, true);
        if (Tensor* gb = tp.grad_slot(b)) gemm_tn(tp.value(a).data(), g.data(), gb->data(), n, k, m, true);
      },
      "matmul");
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (bv.rank() != 2 || av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt shape mismatch: " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()) + "^T");
  }
  const std::size_t n = av.rows(), k = av.cols(), m = bv.rows();
  Tensor out(mat_shape(n, m));
  gemm_nt(av.data(), bv.data(), out.data(), n, k, m);
  return t.record(
      std::move(out), {a, b},
      [a, b, n, k, m](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        if (Tensor* ga = tp.grad_slot(a)) gemm(g.data(), tp.value(b).data(), ga->data(), n, m, k, true);
        if (Tensor* gb = tp.grad_slot(b)) gemm_tn(g.data(), tp.value(a).data(), gb->data(), n, m, k, true);
      },
      "matmul_nt");
}

Var add(Tape& t, Var a, Var b) {
  require_same(t.value(a), t.value(b), "add");
  Tensor out = t.value(a);
  out += t.value(b);
  return t.record(
      std::move(out), {a, b},
      [a, b](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        if (Tensor* ga = tp.grad_slot(a)) *ga += g;
        if (Tensor* gb = tp.grad_slot(b)) *gb += g;
      },
      "add");
}

Var add_bias(Tape& t, Var x, Var bias) {
  const Tensor& xv = t.value(x);
  const Tensor& bv = t.value(bias);
  if (bv.size() != xv.cols()) {
    throw DimensionError("add_bias: bias " + shape_str(bv.shape()) + " vs input " +
                         shape_str(xv.shape()));
  }
  Tensor out = xv;
  const std::size_t rows = out.rows(), cols = out.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) o[c] += bv[c];
  }
  return t.record(
      std::move(out), {x, bias},
      [x, bias, rows, cols](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        if (Tensor* gx = tp.grad_slot(x)) *gx += g;
        if (Tensor* gb = tp.grad_slot(bias)) {
          for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = g.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) (*gb)[c] += gr[c];
          }
        }
      },
      "add_bias");
}

Var add_tiled(Tape& t, Var x, const Tensor& pattern) {
  const Tensor& xv = t.value(x);
  if (pattern.cols() != xv.cols() || xv.rows() % pattern.rows() != 0) {
    throw DimensionError("add_tiled: pattern " + shape_str(pattern.shape()) + " vs input " +
                         shape_str(xv.shape()));
  }
  Tensor out = xv;
  const std::size_t block = pattern.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += pattern[i % block];
  return t.record(
      std::move(out), {x},
      [x](Tape& tp, std::size_t self) {
        if (Tensor* gx = tp.grad_slot(x)) *gx += tp.upstream(self);
      },
      "add_tiled");
}

Var scale(Tape& t, Var x, double s) {
  Tensor out = t.value(x) * s;
  return t.record(
      std::move(out), {x},
      [x, s](Tape& tp, std::size_t self) {
        if (Tensor* gx = tp.grad_slot(x)) {
          const Tensor& g = tp.upstream(self);
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += s * g[i];
        }
      },
      "scale");
}

Var mul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_same(av, bv, "mul");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return t.record(
      std::move(out), {a, b},
      [a, b](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        if (Tensor* ga = tp.grad_slot(a)) {
          const Tensor& bv2 = tp.value(b);
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv2[i];
        }
        if (Tensor* gb = tp.grad_slot(b)) {
          const Tensor& av2 = tp.value(a);
          for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av2[i];
        }
      },
      "mul");
}

namespace {
thread_local ReluPatternWatch* active_watch = nullptr;
thread_local std::uint64_t watch_hash = 0;
}  // namespace

ReluPatternWatch::ReluPatternWatch() : previous_(active_watch) {
  active_watch = this;
  watch_hash = 0;
}

ReluPatternWatch::~ReluPatternWatch() { active_watch = previous_; }

std::uint64_t ReluPatternWatch::take() {
  const std::uint64_t h = watch_hash;
  watch_hash = 0;
  return h;
}

Var relu(Tape& t, Var x) {
  Tensor out = t.value(x);
  if (active_watch) {
    // FNV-1a over the active bits.
    std::uint64_t h = watch_hash ^ 0xcbf29ce484222325ULL;
    for (double v : out.values()) h = (h ^ static_cast<std::uint64_t>(v > 0.0)) * 0x100000001b3ULL;
    watch_hash = h;
  }
  for (auto& v : out.values()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  return t.record(
      std::move(out), {x},
      [x](Tape& tp, std::size_t self) {
        if (Tensor* gx = tp.grad_slot(x)) {
          const Tensor& g = tp.upstream(self);
          const Tensor& xv = tp.value(x);
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (xv[i] > 0.0) (*gx)[i] += g[i];
          }
        }
      },
      "relu");
}

Var sigmoid(Tape& t, Var x) {
  Tensor out = t.value(x);
  for (auto& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  return t.record(
      std::move(out), {x},
      [x](Tape& tp, std::size_t self) {
        if (Tensor* gx = tp.grad_slot(x)) {
          const Tensor& g = tp.upstream(self);
          const Tensor& y = tp.value(Var{self});
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * y[i] * (1.0 - y[i]);
        }
      },
      "sigmoid");
}

Var sum(Tape& t, Var x) {
  Tensor out = Tensor::scalar(deepnmt::sum(t.value(x)));
  return t.record(
      std::move(out), {x},
      [x](Tape& tp, std::size_t self) {
        if (Tensor* gx = tp.grad_slot(x)) {
          const double g = tp.upstream(self)[0];
          for (auto& v : gx->values()) v += g;
        }
      },
      "sum");
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.rows() != bv.rows()) {
    throw DimensionError("concat_cols: " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  }
  const std::size_t rows = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor out(mat_shape(rows, ca + cb));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  return t.record(
      std::move(out), {a, b},
      [a, b, rows, ca, cb](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        Tensor* ga = tp.grad_slot(a);
        Tensor* gb = tp.grad_slot(b);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = g.data() + r * (ca + cb);
          if (ga) for (std::size_t c = 0; c < ca; ++c) (*ga)[r * ca + c] += gr[c];
          if (gb) for (std::size_t c = 0; c < cb; ++c) (*gb)[r * cb + c] += gr[ca + c];
        }
      },
      "concat_cols");
}

Var slice_cols(Tape& t, Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = t.value(x);
  if (begin >= end || end > xv.cols()) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_str(xv.shape()));
  }
  const std::size_t rows = xv.rows(), cols = xv.cols(), w = end - begin;
  Tensor out(mat_shape(rows, w));
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.data() + r * cols + begin, w, out.data() + r * w);
  return t.record(
      std::move(out), {x},
      [x, rows, cols, begin, w](Tape& tp, std::size_t self) {
        if (Tensor* gx = tp.grad_slot(x)) {
          const Tensor& g = tp.upstream(self);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < w; ++c) (*gx)[r * cols + begin + c] += g[r * w + c];
          }
        }
      },
      "slice_cols");
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gain);
  const Tensor& bv = t.value(bias);
  const std::size_t rows = xv.rows(), d = xv.cols();
  if (gv.size() != d || bv.size() != d) {
    throw DimensionError("layer_norm: gain/bias length must equal " + std::to_string(d));
  }
  if (!(eps >= 0.0)) throw ParameterError("layer_norm: eps must be non-negative");
  Tensor normed(xv.shape());
  std::vector<double> inv_std(rows);
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xr[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    double* nr = normed.data() + r * d;
    double* orow = out.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) {
      nr[c] = (xr[c] - mean) * is;
      orow[c] = nr[c] * gv[c] + bv[c];
    }
  }
  return t.record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, rows, d, normed = std::move(normed), inv_std = std::move(inv_std)](
          Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        const Tensor& gv2 = tp.value(gain);
        if (Tensor* gg = tp.grad_slot(gain)) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < d; ++c) (*gg)[c] += g[r * d + c] * normed[r * d + c];
          }
        }
        if (Tensor* gb = tp.grad_slot(bias)) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < d; ++c) (*gb)[c] += g[r * d + c];
          }
        }
        if (Tensor* gx = tp.grad_slot(x)) {
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = g.data() + r * d;
            const double* nr = normed.data() + r * d;
            double mean_dy = 0.0, mean_dy_n = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              const double dy = gr[c] * gv2[c];
              mean_dy += dy;
              mean_dy_n += dy * nr[c];
            }
            mean_dy *= inv_d;
            mean_dy_n *= inv_d;
            double* out_r = gx->data() + r * d;
            for (std::size_t c = 0; c < d; ++c) {
              const double dy = gr[c] * gv2[c];
              out_r[c] += inv_std[r] * (dy - mean_dy - nr[c] * mean_dy_n);
            }
          }
        }
      },
      "layer_norm");
}

Var softmax(Tape& t, Var x, const Tensor& mask) {
  Tensor out = deepnmt::softmax(t.value(x), t.value(x).rank() - 1, mask);
  return t.record(
      std::move(out), {x},
      [x](Tape& tp, std::size_t self) {
        if (Tensor* gx = tp.grad_slot(x)) {
          const Tensor& g = tp.upstream(self);
          const Tensor& y = tp.value(Var{self});
          const std::size_t rows = y.rows(), cols = y.cols();
          for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
            for (std::size_t c = 0; c < cols; ++c) {
              (*gx)[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
            }
          }
        }
      },
      "softmax");
}

Var attend(Tape& t, Var q, Var k, Var v, const AttendSpec& spec) {
  const Tensor& qv = t.value(q);
  const Tensor& kv = t.value(k);
  const Tensor& vv = t.value(v);
  const std::size_t B = spec.batch, I = spec.q_len, J = spec.k_len, H = spec.heads;
  const std::size_t d = qv.cols();
  if (H == 0 || d % H != 0) {
    throw DimensionError("attend: width " + std::to_string(d) + " not divisible by heads " +
                         std::to_string(H));
  }
  if (qv.rows() != B * I || kv.rows() != B * J || vv.rows() != B * J || kv.cols() != d ||
      vv.cols() != d) {
    throw DimensionError("attend: q " + shape_str(qv.shape()) + ", k " + shape_str(kv.shape()) +
                         ", v " + shape_str(vv.shape()) + " inconsistent with batch " +
                         std::to_string(B) + " lengths " + std::to_string(I) + "/" +
                         std::to_string(J));
  }
  if (!spec.key_lengths.empty() && spec.key_lengths.size() != B) {
    throw DimensionError("attend: key_lengths has " + std::to_string(spec.key_lengths.size()) +
                         " entries for batch " + std::to_string(B));
  }
  if (spec.causal && I != J) throw DimensionError("attend: causal mask needs q_len == k_len");
  if (spec.dropout < 0.0 || spec.dropout >= 1.0) throw ParameterError("attend: dropout rate must be in [0,1)");
  const std::size_t dh = d / H;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool drop = spec.rng != nullptr && spec.dropout > 0.0;

  // probs[b][h][i][j] before dropout; keep[] holds the dropout multipliers.
  std::vector<double> probs(B * H * I * J);
  std::vector<double> keep(drop ? probs.size() : 0);
  Tensor out(mat_shape(B * I, d));
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t klen = spec.key_lengths.empty() ? J : spec.key_lengths[b];
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < I; ++i) {
        double* p = probs.data() + ((b * H + h) * I + i) * J;
        const double* qr = qv.data() + (b * I + i) * d + h * dh;
        for (std::size_t j = 0; j < J; ++j) {
          const double* kr = kv.data() + (b * J + j) * d + h * dh;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += qr[c] * kr[c];
          s *= sc;
          if (j >= klen || (spec.causal && j > i)) s += kMaskValue;
          p[j] = s;
        }
        softmax_inplace({p, J});
        double* orow = out.data() + (b * I + i) * d + h * dh;
        for (std::size_t j = 0; j < J; ++j) {
          double w = p[j];
          if (drop) {
            const double m = spec.rng->uniform01() < spec.dropout ? 0.0 : 1.0 / (1.0 - spec.dropout);
            keep[((b * H + h) * I + i) * J + j] = m;
            w *= m;
          }
          if (w == 0.0) continue;
          const double* vr = vv.data() + (b * J + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) orow[c] += w * vr[c];
        }
      }
    }
  }
  return t.record(
      std::move(out), {q, k, v},
      [q, k, v, B, I, J, H, d, dh, sc, probs = std::move(probs), keep = std::move(keep)](
          Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        const Tensor& qv2 = tp.value(q);
        const Tensor& kv2 = tp.value(k);
        const Tensor& vv2 = tp.value(v);
        Tensor* gq = tp.grad_slot(q);
        Tensor* gk = tp.grad_slot(k);
        Tensor* gv = tp.grad_slot(v);
        std::vector<double> dp(J);
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t i = 0; i < I; ++i) {
              const std::size_t base = ((b * H + h) * I + i) * J;
              const double* p = probs.data() + base;
              const double* gr = g.data() + (b * I + i) * d + h * dh;
              // dL/d(dropped weight) and dV
              for (std::size_t j = 0; j < J; ++j) {
                const double* vr = vv2.data() + (b * J + j) * d + h * dh;
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += gr[c] * vr[c];
                const double m = keep.empty() ? 1.0 : keep[base + j];
                dp[j] = s * m;
                if (gv) {
                  const double w = p[j] * m;
                  if (w != 0.0) {
                    double* gvr = gv->data() + (b * J + j) * d + h * dh;
                    for (std::size_t c = 0; c < dh; ++c) gvr[c] += w * gr[c];
                  }
                }
              }
              double dot = 0.0;
              for (std::size_t j = 0; j < J; ++j) dot += p[j] * dp[j];
              const double* qr = qv2.data() + (b * I + i) * d + h * dh;
              double* gqr = gq ? gq->data() + (b * I + i) * d + h * dh : nullptr;
              for (std::size_t j = 0; j < J; ++j) {
                const double ds = p[j] * (dp[j] - dot) * sc;
                if (ds == 0.0) continue;
                const double* kr = kv2.data() + (b * J + j) * d + h * dh;
                if (gqr) for (std::size_t c = 0; c < dh; ++c) gqr[c] += ds * kr[c];
                if (gk) {
                  double* gkr = gk->data() + (b * J + j) * d + h * dh;
                  for (std::size_t c = 0; c < dh; ++c) gkr[c] += ds * qr[c];
                }
              }
            }
          }
        }
      },
      "attend");
}

Var causal_mean(Tape& t, Var x, std::size_t batch, std::size_t len) {
  const Tensor& xv = t.value(x);
  if (xv.rows() != batch * len) {
    throw DimensionError("causal_mean: " + shape_str(xv.shape()) + " is not " +
                         std::to_string(batch) + " blocks of " + std::to_string(len) + " rows");
  }
  const std::size_t d = xv.cols();
  Tensor out(xv.shape());
  std::vector<double> run(d);
  for (std::size_t b = 0; b < batch; ++b) {
    std::fill(run.begin(), run.end(), 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      const double* xr = xv.data() + (b * len + i) * d;
      double* orow = out.data() + (b * len + i) * d;
      const double inv = 1.0 / static_cast<double>(i + 1);
      for (std::size_t c = 0; c < d; ++c) {
        run[c] += xr[c];
        orow[c] = run[c] * inv;
      }
    }
  }
  return t.record(
      std::move(out), {x},
      [x, batch, len, d](Tape& tp, std::size_t self) {
        if (Tensor* gx = tp.grad_slot(x)) {
          const Tensor& g = tp.upstream(self);
          std::vector<double> acc(d);
          for (std::size_t b = 0; b < batch; ++b) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t i = len; i-- > 0;) {
              const double inv = 1.0 / static_cast<double>(i + 1);
              const double* gr = g.data() + (b * len + i) * d;
              double* gxr = gx->data() + (b * len + i) * d;
              for (std::size_t c = 0; c < d; ++c) {
                acc[c] += gr[c] * inv;
                gxr[c] += acc[c];
              }
            }
          }
        }
      },
      "causal_mean");
}

Var gather_rows(Tape& t, Var table, std::span<const int> ids, double scale_by) {
  const Tensor& tv = t.value(table);
  const std::size_t vocab = tv.rows(), d = tv.cols();
  Tensor out(mat_shape(ids.size(), d));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
      throw ParameterError("token id " + std::to_string(ids[r]) + " outside vocabulary of " +
                           std::to_string(vocab));
    }
    const double* src = tv.data() + static_cast<std::size_t>(ids[r]) * d;
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = src[c] * scale_by;
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return t.record(
      std::move(out), {table},
      [table, d, scale_by, saved = std::move(saved)](Tape& tp, std::size_t self) {
        if (Tensor* gt = tp.grad_slot(table)) {
          const Tensor& g = tp.upstream(self);
          for (std::size_t r = 0; r < saved.size(); ++r) {
            double* dst = gt->data() + static_cast<std::size_t>(saved[r]) * d;
            for (std::size_t c = 0; c < d; ++c) dst[c] += g[r * d + c] * scale_by;
          }
        }
      },
      "gather_rows");
}

Var dropout(Tape& t, Var x, double rate, Rng* rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ParameterError("dropout rate must be in [0,1), got " + std::to_string(rate));
  }
  if (rate == 0.0 || rng == nullptr) return x;
  const Tensor& xv = t.value(x);
  Tensor mask(xv.shape());
  const double kept = 1.0 / (1.0 - rate);
  for (auto& m : mask.values()) m = rng->uniform01() < rate ? 0.0 : kept;
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return t.record(
      std::move(out), {x},
      [x, mask = std::move(mask)](Tape& tp, std::size_t self) {
        if (Tensor* gx = tp.grad_slot(x)) {
          const Tensor& g = tp.upstream(self);
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * mask[i];
        }
      },
      "dropout");
}

Var smoothed_xent(Tape& t, Var logits, std::span<const int> gold, double eps, int pad_id) {
  const Tensor& lv = t.value(logits);
  const std::size_t rows = lv.rows(), V = lv.cols();
  if (V < 2) throw ParameterError("smoothed_xent needs at least 2 classes");
  if (gold.size() != rows) {
    throw DimensionError("smoothed_xent: " + std::to_string(gold.size()) + " gold ids for " +
                         std::to_string(rows) + " rows");
  }
  if (eps < 0.0 || eps >= 1.0) throw ParameterError("label smoothing must be in [0,1)");
  const double off = eps / static_cast<double>(V - 1);
  const double on = 1.0 - eps;
  Tensor probs(lv.shape());
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (gold[r] == pad_id) continue;
    if (gold[r] < 0 || static_cast<std::size_t>(gold[r]) >= V) {
      throw ParameterError("gold id " + std::to_string(gold[r]) + " outside vocabulary of " +
                           std::to_string(V));
    }
    ++count;
    const double* z = lv.data() + r * V;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < V; ++c) mx = std::max(mx, z[c]);
    double se = 0.0;
    for (std::size_t c = 0; c < V; ++c) se += std::exp(z[c] - mx);
    const double lse = mx + std::log(se);
    double cross = 0.0;
    double* p = probs.data() + r * V;
    for (std::size_t c = 0; c < V; ++c) {
      const double target = static_cast<int>(c) == gold[r] ? on : off;
      cross -= target * (z[c] - lse);
      p[c] = std::exp(z[c] - lse) - target;
    }
    total += cross;
  }
  const double denom = count ? static_cast<double>(count) : 1.0;
  std::vector<int> mask_rows(gold.begin(), gold.end());
  return t.record(
      Tensor::scalar(total / denom), {logits},
      [logits, rows, V, denom, pad_id, probs = std::move(probs), mask_rows = std::move(mask_rows)](
          Tape& tp, std::size_t self) {
        if (Tensor* gl = tp.grad_slot(logits)) {
          const double g = tp.upstream(self)[0] / denom;
          for (std::size_t r = 0; r < rows; ++r) {
            if (mask_rows[r] == pad_id) continue;
            for (std::size_t c = 0; c < V; ++c) (*gl)[r * V + c] += g * probs[r * V + c];
          }
        }
      },
      "smoothed_xent");
}

}  // namespace deepnmt::ad
