#include "deepnmt/model.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "deepnmt/kernels.hpp"

namespace deepnmt {

std::string_view to_string(Layout layout) {
  return layout == Layout::post_norm ? "post" : "pre";
}

std::string_view to_string(DecoderVariant variant) {
  switch (variant) {
    case DecoderVariant::baseline: return "baseline";
    case DecoderVariant::matt: return "matt";
    case DecoderVariant::matt_self: return "matt_self";
    case DecoderVariant::aan_original: return "aan";
  }
  return "?";
}

std::string_view to_string(Stack stack) { return stack == Stack::encoder ? "enc" : "dec"; }

std::string_view to_string(Sublayer kind) {
  switch (kind) {
    case Sublayer::self: return "self";
    case Sublayer::cross: return "cross";
    case Sublayer::ffn: return "ffn";
    case Sublayer::merged: return "merged";
  }
  return "?";
}

Layout parse_layout(std::string_view name) {
  if (name == "post" || name == "post_norm") return Layout::post_norm;
  if (name == "pre" || name == "pre_norm") return Layout::pre_norm;
  throw ConfigError("layout", "unknown layout '" + std::string(name) + "' (expected post|pre)");
}

DecoderVariant parse_decoder_variant(std::string_view name) {
  if (name == "baseline") return DecoderVariant::baseline;
  if (name == "matt") return DecoderVariant::matt;
  if (name == "matt_self") return DecoderVariant::matt_self;
  if (name == "aan" || name == "aan_original") return DecoderVariant::aan_original;
  throw ConfigError("decoder", "unknown decoder '" + std::string(name) +
                                   "' (expected baseline|matt|matt_self|aan)");
}

// ---------------------------------------------------------------- config

void ModelConfig::validate() const {
  if (layers < 1) throw ConfigError("layers", "layers must be >= 1");
  if (dim < 2 || dim % 2 != 0) throw ConfigError("dim", "dim must be an even number >= 2");
  if (heads < 1 || dim % heads != 0) {
    throw ConfigError("heads", "heads must divide dim (" + std::to_string(dim) + ")");
  }
  if (ffn_dim < 1) throw ConfigError("ffn_dim", "ffn_dim must be >= 1");
  if (src_vocab <= static_cast<std::size_t>(kFirstSymbol)) {
    throw ConfigError("src_vocab", "vocabulary must leave room for the 3 special ids");
  }
  if (tgt_vocab <= static_cast<std::size_t>(kFirstSymbol)) {
    throw ConfigError("tgt_vocab", "vocabulary must leave room for the 3 special ids");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha", "alpha must lie in [0,1]");
  if (!(sigma > 0.0)) throw ConfigError("sigma", "sigma must be positive");
  if (!(dp_r >= 0.0 && dp_r < 1.0)) throw ConfigError("dp_r", "dp_r must lie in [0,1)");
  if (!(dp_a >= 0.0 && dp_a < 1.0)) throw ConfigError("dp_a", "dp_a must lie in [0,1)");
  if (!(ln_eps > 0.0)) throw ConfigError("ln_eps", "ln_eps must be positive");
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t parse_size(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(key, key + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError(key, key + ": expected a number, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw ConfigError(key, key + ": expected a boolean, got '" + text + "'");
}

}  // namespace

std::map<std::string, std::string> ModelConfig::to_kv() const {
  return {
      {"layers", std::to_string(layers)},
      {"dim", std::to_string(dim)},
      {"ffn_dim", std::to_string(ffn_dim)},
      {"heads", std::to_string(heads)},
      {"src_vocab", std::to_string(src_vocab)},
      {"tgt_vocab", std::to_string(tgt_vocab)},
      {"aan_ffn_dim", std::to_string(aan_ffn_dim)},
      {"layout", std::string(to_string(layout))},
      {"decoder", std::string(to_string(decoder))},
      {"init", std::string(to_string(init))},
      {"alpha", fmt_double(alpha)},
      {"sigma", fmt_double(sigma)},
      {"ds_encoder", ds_encoder ? "1" : "0"},
      {"ds_decoder", ds_decoder ? "1" : "0"},
      {"dp_r", fmt_double(dp_r)},
      {"dp_a", fmt_double(dp_a)},
      {"share_softmax", share_target_softmax ? "1" : "0"},
      {"ln_eps", fmt_double(ln_eps)},
  };
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  for (const auto& [key, value] : kv) {
    if (key == "layers") c.layers = parse_size(key, value);
    else if (key == "dim") c.dim = parse_size(key, value);
    else if (key == "ffn_dim") c.ffn_dim = parse_size(key, value);
    else if (key == "heads") c.heads = parse_size(key, value);
    else if (key == "src_vocab") c.src_vocab = parse_size(key, value);
    else if (key == "tgt_vocab") c.tgt_vocab = parse_size(key, value);
    else if (key == "aan_ffn_dim") c.aan_ffn_dim = parse_size(key, value);
    else if (key == "layout") c.layout = parse_layout(value);
    else if (key == "decoder") c.decoder = parse_decoder_variant(value);
    else if (key == "init") {
      try {
        c.init = parse_init_policy(value);
      } catch (const ParameterError& e) {
        throw ConfigError("init", e.what());
      }
    } else if (key == "alpha") c.alpha = parse_real(key, value);
    else if (key == "sigma") c.sigma = parse_real(key, value);
    else if (key == "ds_encoder") c.ds_encoder = parse_bool(key, value);
    else if (key == "ds_decoder") c.ds_decoder = parse_bool(key, value);
    else if (key == "dp_r") c.dp_r = parse_real(key, value);
    else if (key == "dp_a") c.dp_a = parse_real(key, value);
    else if (key == "share_softmax") c.share_target_softmax = parse_bool(key, value);
    else if (key == "ln_eps") c.ln_eps = parse_real(key, value);
    else throw ConfigError(key, "unknown model key '" + key + "'");
  }
  c.validate();
  return c;
}

// ------------------------------------------------------------ parameters

Parameters::Parameters(const Parameters& other)
    : order_(other.order_), alias_(other.alias_), init_(other.init_) {
  for (const auto& [name, ptr] : other.tensors_) tensors_[name] = std::make_shared<Tensor>(*ptr);
}

Parameters& Parameters::operator=(const Parameters& other) {
  if (this != &other) {
    Parameters copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Parameters::add(const std::string& name, Tensor value, InitRecord init) {
  if (contains(name)) throw ParameterError("duplicate parameter name '" + name + "'");
  order_.push_back(name);
  tensors_[name] = std::make_shared<Tensor>(std::move(value));
  init_[name] = init;
}

void Parameters::alias(const std::string& name, const std::string& target) {
  if (contains(name)) throw ParameterError("duplicate parameter name '" + name + "'");
  const std::string& root = canonical(target);
  order_.push_back(name);
  alias_[name] = root;
}

bool Parameters::contains(const std::string& name) const {
  return tensors_.count(name) != 0 || alias_.count(name) != 0;
}

const std::string& Parameters::canonical(const std::string& name) const {
  if (auto it = alias_.find(name); it != alias_.end()) return it->second;
  if (tensors_.count(name) == 0) throw ParameterError("unknown parameter '" + name + "'");
  return tensors_.find(name)->first;
}

Tensor& Parameters::at(const std::string& name) { return *tensors_.at(canonical(name)); }

const Tensor& Parameters::at(const std::string& name) const {
  return *tensors_.at(canonical(name));
}

const InitRecord& Parameters::init(const std::string& name) const {
  return init_.at(canonical(name));
}

std::vector<std::string> Parameters::storage_names() const {
  std::vector<std::string> out;
  for (const auto& n : order_) {
    if (!is_alias(n)) out.push_back(n);
  }
  return out;
}

std::string param_name(Stack stack, std::size_t layer, std::string_view sublayer,
                       std::string_view matrix) {
  std::string out(to_string(stack));
  out += '.';
  out += std::to_string(layer);
  out += '.';
  out += sublayer;
  out += '.';
  out += matrix;
  return out;
}

// ----------------------------------------------------------------- build

namespace {

class Builder {
 public:
  Builder(const ModelConfig& c, Rng& rng) : c_(c), rng_(rng) {}

  void weight(const std::string& name, std::size_t d_in, std::size_t d_out, Stack stack,
              std::size_t layer) {
    InitSpec spec;
    spec.policy = c_.init;
    spec.alpha = c_.alpha;
    spec.sigma = c_.sigma;
    spec.layer = layer == 0 ? 1 : layer;
    spec.d_in = d_in;
    spec.d_out = d_out;
    const bool ds_enabled = stack == Stack::encoder ? c_.ds_encoder : c_.ds_decoder;
    if (spec.policy == InitPolicy::ds_init && (layer == 0 || !ds_enabled)) {
      spec.policy = InitPolicy::glorot;
    }
    InitRecord rec;
    rec.policy = spec.policy;
    rec.layer = layer;
    if (spec.policy == InitPolicy::fixed_sigma) {
      rec.stddev = spec.sigma;
    } else if (spec.policy == InitPolicy::ds_init) {
      rec.bound = ds_init_bound(spec);
    } else {
      rec.bound = glorot_bound(d_in, d_out);
    }
    params.add(name, sample_weights(rng_, spec), rec);
  }

  void constant(const std::string& name, std::size_t n, double v, std::size_t layer) {
    InitRecord rec;
    rec.layer = layer;
    params.add(name, Tensor({n}, v), rec);
  }

  void layer_norm(const std::string& prefix, std::size_t layer) {
    constant(prefix + ".gain", c_.dim, 1.0, layer);
    constant(prefix + ".bias", c_.dim, 0.0, layer);
  }

  void attention(Stack stack, std::size_t l, std::string_view sub, bool with_output = true,
                 std::string_view prefix = "") {
    const std::size_t d = c_.dim;
    const std::string p(prefix);
    weight(param_name(stack, l, sub, p + "wq"), d, d, stack, l);
    weight(param_name(stack, l, sub, p + "wk"), d, d, stack, l);
    weight(param_name(stack, l, sub, p + "wv"), d, d, stack, l);
    if (with_output) weight(param_name(stack, l, sub, p + "wo"), d, d, stack, l);
  }

  void ffn(Stack stack, std::size_t l, std::string_view sub, std::string_view prefix,
           std::size_t inner) {
    const std::size_t d = c_.dim;
    const std::string p(prefix);
    weight(param_name(stack, l, sub, p + "w1"), d, inner, stack, l);
    constant(param_name(stack, l, sub, p + "b1"), inner, 0.0, l);
    weight(param_name(stack, l, sub, p + "w2"), inner, d, stack, l);
    constant(param_name(stack, l, sub, p + "b2"), d, 0.0, l);
  }

  Parameters params;

 private:
  const ModelConfig& c_;
  Rng& rng_;
};

std::string ln_name(Stack stack, std::size_t l, std::string_view sub) {
  return std::string(to_string(stack)) + "." + std::to_string(l) + "." + std::string(sub) + "_ln";
}

}  // namespace

Model build(const ModelConfig& config, Rng& rng) {
  config.validate();
  Builder b(config, rng);
  const std::size_t d = config.dim;
  b.weight("enc.embed", config.src_vocab, d, Stack::encoder, 0);
  b.weight("dec.embed", config.tgt_vocab, d, Stack::decoder, 0);
  if (config.share_target_softmax) {
    b.params.alias("dec.softmax", "dec.embed");
  } else {
    b.weight("dec.softmax", config.tgt_vocab, d, Stack::decoder, 0);
  }
  for (std::size_t l = 1; l <= config.layers; ++l) {
    b.attention(Stack::encoder, l, "self");
    b.layer_norm(ln_name(Stack::encoder, l, "self"), l);
    b.ffn(Stack::encoder, l, "ffn", "", config.ffn_dim);
    b.layer_norm(ln_name(Stack::encoder, l, "ffn"), l);
  }
  for (std::size_t l = 1; l <= config.layers; ++l) {
    switch (config.decoder) {
      case DecoderVariant::baseline:
        b.attention(Stack::decoder, l, "self");
        b.layer_norm(ln_name(Stack::decoder, l, "self"), l);
        b.attention(Stack::decoder, l, "cross");
        b.layer_norm(ln_name(Stack::decoder, l, "cross"), l);
        break;
      case DecoderVariant::matt:
        b.weight(param_name(Stack::decoder, l, "merged", "saan_wv"), d, d, Stack::decoder, l);
        b.attention(Stack::decoder, l, "merged");
        b.layer_norm(ln_name(Stack::decoder, l, "merged"), l);
        break;
      case DecoderVariant::matt_self:
        b.attention(Stack::decoder, l, "merged", false, "self_");
        b.attention(Stack::decoder, l, "merged");
        b.layer_norm(ln_name(Stack::decoder, l, "merged"), l);
        break;
      case DecoderVariant::aan_original:
        b.ffn(Stack::decoder, l, "merged", "aan_", config.aan_inner());
        b.weight(param_name(Stack::decoder, l, "merged", "gate_w"), 2 * d, 2 * d, Stack::decoder, l);
        b.constant(param_name(Stack::decoder, l, "merged", "gate_b"), 2 * d, 0.0, l);
        b.attention(Stack::decoder, l, "merged");
        b.layer_norm(ln_name(Stack::decoder, l, "merged"), l);
        break;
    }
    b.ffn(Stack::decoder, l, "ffn", "", config.ffn_dim);
    b.layer_norm(ln_name(Stack::decoder, l, "ffn"), l);
  }
  if (config.layout == Layout::pre_norm) {
    b.layer_norm("enc.final_ln", 0);
    b.layer_norm("dec.final_ln", 0);
  }
  return Model{config, std::move(b.params)};
}

std::size_t count_params(const Parameters& params) {
  std::size_t n = 0;
  for (const auto& name : params.storage_names()) n += params.at(name).size();
  return n;
}

std::size_t count_params(const Parameters& params,
                         std::initializer_list<std::string_view> prefixes) {
  std::size_t n = 0;
  for (const auto& name : params.storage_names()) {
    for (auto p : prefixes) {
      if (std::string_view(name).starts_with(p)) {
        n += params.at(name).size();
        break;
      }
    }
  }
  return n;
}

std::size_t decoder_attention_params(const Model& model, std::size_t layer) {
  const std::string base = "dec." + std::to_string(layer) + ".";
  const std::string self = base + "self.", cross = base + "cross.", merged = base + "merged.";
  return count_params(model.params, {self, cross, merged});
}

// --------------------------------------------------------------- forward

Var ParamBinder::operator()(const std::string& name) {
  return tape_.param(params_.canonical(name), params_.at(name));
}

namespace {

struct Ctx {
  Tape& t;
  ParamBinder& p;
  const ModelConfig& cfg;
  const ForwardOptions& opt;

  Rng* rng() const { return opt.mode == Mode::train ? opt.rng : nullptr; }
  AttentionOptions attn(bool causal) const { return {causal, cfg.dp_a, rng()}; }

  LayerNormVars ln(const std::string& prefix) {
    return {p(prefix + ".gain"), p(prefix + ".bias"), cfg.ln_eps};
  }
  AttentionVars attention_vars(Stack s, std::size_t l, std::string_view sub,
                               std::string_view prefix = "") {
    const std::string pre(prefix);
    return {p(param_name(s, l, sub, pre + "wq")), p(param_name(s, l, sub, pre + "wk")),
            p(param_name(s, l, sub, pre + "wv")), p(param_name(s, l, sub, "wo")), cfg.heads};
  }
  FfnVars ffn_vars(Stack s, std::size_t l, std::string_view sub, std::string_view prefix = "") {
    const std::string pre(prefix);
    return {p(param_name(s, l, sub, pre + "w1")), p(param_name(s, l, sub, pre + "b1")),
            p(param_name(s, l, sub, pre + "w2")), p(param_name(s, l, sub, pre + "b2"))};
  }

  /// Residual block in the configured layout. Post-norm: LN(z + drop(f(z))).
  /// Pre-norm: z + drop(f(LN(z))).
  template <class F>
  Var block(Var z, Stack s, std::size_t l, Sublayer kind, F&& f) {
    LayerNormVars norm = ln(ln_name(s, l, to_string(kind)));
    if (cfg.layout == Layout::post_norm) {
      Var fz = f(z);
      Var r = residual(t, z, dropout(t, fz, cfg.dp_r, rng(), opt.mode));
      Var o = layer_norm(t, r, norm);
      if (opt.probes) {
        t.retain(z);
        t.retain(r);
        t.retain(o);
        opt.probes->push_back({s, l, kind, z, r, o});
      }
      return o;
    }
    Var y = layer_norm(t, z, norm);
    return residual(t, z, dropout(t, f(y), cfg.dp_r, rng(), opt.mode));
  }

  Var embed(std::span<const int> ids, const std::string& table, std::size_t len) {
    const double s = std::sqrt(static_cast<double>(cfg.dim));
    Var x = ad::gather_rows(t, p(table), ids, s);
    return ad::add_tiled(t, x, positional_encoding(len, cfg.dim));
  }
};

void check_options(const ModelConfig& cfg, const ForwardOptions& opt) {
  if (opt.mode == Mode::train && opt.rng == nullptr && (cfg.dp_r > 0.0 || cfg.dp_a > 0.0)) {
    throw ContractError("train-mode forward with dropout needs an Rng");
  }
}

void check_ids(std::span<const int> ids, std::size_t vocab, const char* side) {
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw ParameterError(std::string(side) + " token id " + std::to_string(id) +
                           " outside vocabulary of " + std::to_string(vocab));
    }
  }
}

}  // namespace

Var encode(Tape& t, ParamBinder& p, const Model& model, const Batch& batch,
           const ForwardOptions& options) {
  const ModelConfig& cfg = model.config;
  check_options(cfg, options);
  check_ids(batch.src, cfg.src_vocab, "source");
  Ctx c{t, p, cfg, options};
  const SeqLayout src = batch.src_layout();
  Var x = c.embed(batch.src, "enc.embed", batch.src_len);
  for (std::size_t l = 1; l <= cfg.layers; ++l) {
    AttentionVars self = c.attention_vars(Stack::encoder, l, "self");
    x = c.block(x, Stack::encoder, l, Sublayer::self, [&](Var z) {
      return attention(t, z, src, z, src, self, c.attn(false));
    });
    FfnVars f = c.ffn_vars(Stack::encoder, l, "ffn");
    x = c.block(x, Stack::encoder, l, Sublayer::ffn, [&](Var z) { return ffn(t, z, f); });
  }
  if (cfg.layout == Layout::pre_norm) x = layer_norm(t, x, c.ln("enc.final_ln"));
  return x;
}

Var decode_train(Tape& t, ParamBinder& p, const Model& model, const Batch& batch, Var memory,
                 const ForwardOptions& options) {
  const ModelConfig& cfg = model.config;
  check_options(cfg, options);
  check_ids(batch.tgt_in, cfg.tgt_vocab, "target");
  Ctx c{t, p, cfg, options};
  const SeqLayout src = batch.src_layout();
  const SeqLayout tgt = batch.tgt_layout();
  Var x = c.embed(batch.tgt_in, "dec.embed", batch.tgt_len);
  for (std::size_t l = 1; l <= cfg.layers; ++l) {
    switch (cfg.decoder) {
      case DecoderVariant::baseline: {
        AttentionVars self = c.attention_vars(Stack::decoder, l, "self");
        x = c.block(x, Stack::decoder, l, Sublayer::self, [&](Var z) {
          return attention(t, z, tgt, z, tgt, self, c.attn(true));
        });
        AttentionVars cross = c.attention_vars(Stack::decoder, l, "cross");
        x = c.block(x, Stack::decoder, l, Sublayer::cross, [&](Var z) {
          return attention(t, z, tgt, memory, src, cross, c.attn(false));
        });
        break;
      }
      case DecoderVariant::matt: {
        AttentionVars cross = c.attention_vars(Stack::decoder, l, "merged");
        Var wv = p(param_name(Stack::decoder, l, "merged", "saan_wv"));
        x = c.block(x, Stack::decoder, l, Sublayer::merged, [&](Var z) {
          return merged_attention(t, z, tgt, memory, src, wv, cross, c.attn(false));
        });
        break;
      }
      case DecoderVariant::matt_self: {
        AttentionVars self = c.attention_vars(Stack::decoder, l, "merged", "self_");
        AttentionVars cross = c.attention_vars(Stack::decoder, l, "merged");
        x = c.block(x, Stack::decoder, l, Sublayer::merged, [&](Var z) {
          Var a = attention_context(t, z, tgt, z, tgt, self, c.attn(true));
          Var b = attention_context(t, z, tgt, memory, src, cross, c.attn(false));
          return ad::matmul(t, ad::add(t, a, b), cross.wo);
        });
        break;
      }
      case DecoderVariant::aan_original: {
        AanVars aan{c.ffn_vars(Stack::decoder, l, "merged", "aan_"),
                    p(param_name(Stack::decoder, l, "merged", "gate_w")),
                    p(param_name(Stack::decoder, l, "merged", "gate_b"))};
        AttentionVars cross = c.attention_vars(Stack::decoder, l, "merged");
        x = c.block(x, Stack::decoder, l, Sublayer::merged, [&](Var z) {
          Var a = aan_original(t, z, tgt, aan);
          Var b = attention(t, z, tgt, memory, src, cross, c.attn(false));
          return ad::add(t, a, b);
        });
        break;
      }
    }
    FfnVars f = c.ffn_vars(Stack::decoder, l, "ffn");
    x = c.block(x, Stack::decoder, l, Sublayer::ffn, [&](Var z) { return ffn(t, z, f); });
  }
  if (cfg.layout == Layout::pre_norm) x = layer_norm(t, x, c.ln("dec.final_ln"));
  return ad::matmul_nt(t, x, p("dec.softmax"));
}

Var batch_loss(Tape& t, ParamBinder& p, const Model& model, const Batch& batch,
               double label_smoothing, const ForwardOptions& options, Var* logits) {
  Var memory = encode(t, p, model, batch, options);
  Var out = decode_train(t, p, model, batch, memory, options);
  if (logits) *logits = out;
  return ad::smoothed_xent(t, out, batch.tgt_out, label_smoothing, kPad);
}

Tensor encode(const Model& model, const Batch& batch) {
  Tape t;
  ParamBinder p(t, model.params);
  return t.value(encode(t, p, model, batch, {}));
}

Tensor decode_train(const Model& model, const Batch& batch) {
  Tape t;
  ParamBinder p(t, model.params);
  Var memory = encode(t, p, model, batch, {});
  return t.value(decode_train(t, p, model, batch, memory, {}));
}

double batch_loss(const Model& model, const Batch& batch, double label_smoothing) {
  Tape t;
  ParamBinder p(t, model.params);
  return t.value(batch_loss(t, p, model, batch, label_smoothing, {})).item();
}

std::size_t correct_tokens(const Tensor& logits, std::span<const int> gold) {
  const std::size_t V = logits.cols();
  std::size_t correct = 0;
  for (std::size_t r = 0; r < gold.size(); ++r) {
    if (gold[r] == kPad) continue;
    const double* z = logits.data() + r * V;
    std::size_t best = 0;
    for (std::size_t c = 1; c < V; ++c) {
      if (z[c] > z[best]) best = c;
    }
    if (static_cast<int>(best) == gold[r]) ++correct;
  }
  return correct;
}

double token_accuracy(const Tensor& logits, std::span<const int> gold) {
  std::size_t total = 0;
  for (int g : gold) total += g != kPad;
  return total ? static_cast<double>(correct_tokens(logits, gold)) / static_cast<double>(total)
               : 0.0;
}

}  // namespace deepnmt
