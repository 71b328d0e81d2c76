#include "deepnmt/probes.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace deepnmt {

std::size_t attach_probes(const ModelConfig& config) {
  if (config.layout != Layout::post_norm) {
    throw UnsupportedLayoutError("probes need the post-norm layout (RC followed by LN)");
  }
  const std::size_t dec = config.decoder == DecoderVariant::baseline ? 3 : 2;
  return config.layers * (2 + dec);
}

namespace {

double masked_norm(const Tensor& g, const std::vector<bool>& valid) {
  if (g.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t r = 0; r < g.rows(); ++r) {
    if (!valid[r]) continue;
    for (double v : g.row(r)) s += v * v;
  }
  return std::sqrt(s);
}

double masked_variance(const Tensor& x, const std::vector<bool>& valid) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (!valid[r]) continue;
    for (double v : x.row(r)) {
      sum += v;
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (!valid[r]) continue;
    for (double v : x.row(r)) sq += (v - mean) * (v - mean);
  }
  return sq / static_cast<double>(n);
}

std::vector<bool> valid_rows(const SeqLayout& layout) {
  std::vector<bool> out(layout.rows(), false);
  for (std::size_t b = 0; b < layout.batch; ++b) {
    for (std::size_t t = 0; t < layout.length(b); ++t) out[b * layout.len + t] = true;
  }
  return out;
}

std::string layer_prefix(Stack s, std::size_t l) {
  return std::string(to_string(s)) + "." + std::to_string(l) + ".";
}

}  // namespace

std::vector<LayerGradNorm> group_layer_norms(const ModelConfig& config,
                                             const std::map<std::string, Tensor>& grads) {
  std::vector<LayerGradNorm> out;
  for (Stack s : {Stack::encoder, Stack::decoder}) {
    for (std::size_t l = 1; l <= config.layers; ++l) {
      const std::string prefix = layer_prefix(s, l);
      double sq = 0.0;
      for (auto it = grads.lower_bound(prefix); it != grads.end() && it->first.starts_with(prefix);
           ++it) {
        for (double v : it->second.values()) sq += v * v;
      }
      out.push_back({s, l, std::sqrt(sq)});
    }
  }
  return out;
}

std::vector<RatioCell> average_cells(const std::vector<ProbeRecord>& records) {
  std::vector<RatioCell> cells;
  for (const auto& r : records) {
    RatioCell* cell = nullptr;
    for (auto& c : cells) {
      if (c.stack == r.stack && c.kind == r.kind) cell = &c;
    }
    if (!cell) {
      cells.push_back({r.stack, r.kind});
      cell = &cells.back();
    }
    cell->count += 1;
    cell->beta_ln += r.beta_ln();
    cell->beta_rc += r.beta_rc();
    cell->beta += r.beta();
    cell->var_r += r.var_r;
  }
  for (auto& c : cells) {
    const double n = static_cast<double>(c.count);
    c.beta_ln /= n;
    c.beta_rc /= n;
    c.beta /= n;
    c.var_r /= n;
  }
  return cells;
}

RatioReport measure_ratios(const Model& model, const Batch& batch, double label_smoothing) {
  attach_probes(model.config);
  Tape t;
  ParamBinder p(t, model.params);
  std::vector<ProbePoint> points;
  ForwardOptions opts;
  opts.mode = Mode::eval;
  opts.probes = &points;
  Var loss = batch_loss(t, p, model, batch, label_smoothing, opts);
  t.backward(loss);

  const std::vector<bool> src_valid = valid_rows(batch.src_layout());
  const std::vector<bool> tgt_valid = valid_rows(batch.tgt_layout());
  RatioReport report;
  report.loss = t.value(loss).item();
  for (const auto& pt : points) {
    const auto& valid = pt.stack == Stack::encoder ? src_valid : tgt_valid;
    ProbeRecord rec;
    rec.stack = pt.stack;
    rec.layer = pt.layer;
    rec.kind = pt.kind;
    rec.norm_o = masked_norm(t.grad(pt.o), valid);
    rec.norm_r = masked_norm(t.grad(pt.r), valid);
    rec.norm_z = masked_norm(t.grad(pt.z), valid);
    rec.var_r = masked_variance(t.value(pt.r), valid);
    if (rec.norm_o == 0.0 || rec.norm_r == 0.0) {
      throw DegenerateSignalError("zero backward signal at " + std::string(to_string(pt.stack)) +
                                  " layer " + std::to_string(pt.layer) + " " +
                                  std::string(to_string(pt.kind)));
    }
    report.records.push_back(rec);
  }
  report.cells = average_cells(report.records);
  report.grad_norms = group_layer_norms(model.config, t.param_grads());
  return report;
}

std::vector<LayerGradNorm> layer_gradient_norms(const Model& model, const Batch& batch,
                                                double label_smoothing, double loss_scale) {
  Tape t;
  ParamBinder p(t, model.params);
  Var loss = batch_loss(t, p, model, batch, label_smoothing, {});
  t.backward(loss, loss_scale);
  return group_layer_norms(model.config, t.param_grads());
}

DynamicsLog::DynamicsLog(std::size_t layers, std::size_t window)
    : layers_(layers), window_(window) {
  if (layers < 1 || window < 1) throw ParameterError("dynamics log needs layers, window >= 1");
}

void DynamicsLog::add(const std::vector<LayerGradNorm>& norms) {
  for (const auto& n : norms) {
    const std::size_t base = n.stack == Stack::encoder ? 0 : 2;
    if (n.layer == 1) acc_[base] += n.norm;
    if (n.layer == layers_) acc_[base + 1] += n.norm;
  }
  if (++filled_ == window_) flush();
}

void DynamicsLog::flush() {
  if (filled_ == 0) return;
  const double n = static_cast<double>(filled_);
  ++windows_;
  rows_.push_back({windows_, Stack::encoder, 1, acc_[0] / n});
  rows_.push_back({windows_, Stack::encoder, layers_, acc_[1] / n});
  rows_.push_back({windows_, Stack::decoder, 1, acc_[2] / n});
  rows_.push_back({windows_, Stack::decoder, layers_, acc_[3] / n});
  filled_ = 0;
  for (double& a : acc_) a = 0.0;
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_ratios_csv(std::ostream& os,
                      const std::vector<std::pair<std::string, RatioReport>>& runs) {
  os << "init,stack,sublayer,beta_ln,beta_rc,beta,var_r\n";
  for (const auto& [label, report] : runs) {
    for (const auto& c : report.cells) {
      os << label << ',' << to_string(c.stack) << ',' << to_string(c.kind) << ','
         << num(c.beta_ln) << ',' << num(c.beta_rc) << ',' << num(c.beta) << ',' << num(c.var_r)
         << '\n';
    }
  }
}

void write_gradnorms_csv(std::ostream& os,
                         const std::vector<std::pair<std::string, RatioReport>>& runs) {
  os << "init,stack,layer,norm\n";
  for (const auto& [label, report] : runs) {
    for (const auto& g : report.grad_norms) {
      os << label << ',' << to_string(g.stack) << ',' << g.layer << ',' << num(g.norm) << '\n';
    }
  }
}

void write_dynamics_csv(std::ostream& os, const DynamicsLog& log) {
  os << "window,stack,layer,norm\n";
  for (const auto& r : log.rows()) {
    os << r.window << ',' << to_string(r.stack) << ',' << r.layer << ',' << num(r.norm) << '\n';
  }
}

}  // namespace deepnmt
