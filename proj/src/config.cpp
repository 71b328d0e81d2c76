#include "deepnmt/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace deepnmt {

namespace {

const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys = {
      "layers", "dim",   "ffn_dim", "heads",      "src_vocab",  "tgt_vocab",
      "aan_ffn_dim", "layout", "decoder", "init", "alpha",      "sigma",
      "ds_encoder", "ds_decoder", "dp_r", "dp_a", "share_softmax", "ln_eps"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t as_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key, key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double as_real(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key, key + ": expected a number, got '" + v + "'");
  }
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k(model_keys().begin(), model_keys().end());
    for (const char* extra :
         {"vocab", "warmup", "lr_scale", "batch_tokens", "steps", "label_smoothing", "adam_beta1",
          "adam_beta2", "adam_eps", "clip_norm", "checkpoint_every", "keep_checkpoints",
          "dynamics_window", "seed", "task", "min_len", "max_len", "beam", "len_penalty",
          "analyze_tokens", "bench_batch", "bench_reps", "bench_warmup", "bench_train_reps",
          "out_dir"}) {
      k.emplace_back(extra);
    }
    std::sort(k.begin(), k.end());
    return k;
  }();
  return keys;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno),
                        "config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(lineno),
                        "config line " + std::to_string(lineno) + ": empty key");
    }
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config", "cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& args) {
  std::map<std::string, std::string> kv;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.size() < 3 || a.rfind("--", 0) != 0) {
      throw ConfigError(a, "unexpected argument '" + a + "' (overrides take the form --key value)");
    }
    std::string body = a.substr(2);
    if (auto eq = body.find('='); eq != std::string::npos) {
      kv[body.substr(0, eq)] = body.substr(eq + 1);
      continue;
    }
    if (i + 1 >= args.size()) throw ConfigError(body, "override --" + body + " needs a value");
    kv[body] = args[++i];
  }
  return kv;
}

RunConfig parse_run_config(const std::map<std::string, std::string>& kv) {
  const auto& known = config_keys();
  for (const auto& [k, v] : kv) {
    if (!std::binary_search(known.begin(), known.end(), k)) {
      throw ConfigError(k, "unknown config key '" + k + "'");
    }
  }
  if (!kv.count("layers")) throw ConfigError("layers", "missing required key 'layers'");

  std::map<std::string, std::string> mkv;
  for (const auto& [k, v] : kv) {
    if (model_keys().count(k)) mkv[k] = v;
  }
  if (auto it = kv.find("vocab"); it != kv.end()) {
    mkv.try_emplace("src_vocab", it->second);
    mkv.try_emplace("tgt_vocab", it->second);
  }
  RunConfig rc;
  rc.model = ModelConfig::from_kv(mkv);

  auto get = [&](const char* key, auto& field, auto conv) {
    if (auto it = kv.find(key); it != kv.end()) field = conv(key, it->second);
  };
  auto sz = [](const std::string& k, const std::string& v) { return as_size(k, v); };
  auto re = [](const std::string& k, const std::string& v) { return as_real(k, v); };
  TrainConfig& t = rc.train;
  get("warmup", t.warmup, sz);
  get("lr_scale", t.lr_scale, re);
  get("batch_tokens", t.batch_tokens, sz);
  get("steps", t.steps, sz);
  get("label_smoothing", t.label_smoothing, re);
  get("adam_beta1", t.adam.beta1, re);
  get("adam_beta2", t.adam.beta2, re);
  get("adam_eps", t.adam.eps, re);
  get("clip_norm", t.adam.clip_norm, re);
  get("checkpoint_every", t.checkpoint_every, sz);
  get("keep_checkpoints", t.keep_checkpoints, sz);
  get("dynamics_window", t.dynamics_window, sz);
  std::size_t seed = t.seed;
  get("seed", seed, sz);
  t.seed = seed;

  rc.task.vocab = std::min(rc.model.src_vocab, rc.model.tgt_vocab);
  if (auto it = kv.find("task"); it != kv.end()) {
    try {
      rc.task.kind = parse_task_kind(it->second);
    } catch (const ParameterError& e) {
      throw ConfigError("task", e.what());
    }
  }
  get("min_len", rc.task.min_len, sz);
  get("max_len", rc.task.max_len, sz);
  get("beam", rc.beam, sz);
  get("len_penalty", rc.len_penalty, re);
  get("analyze_tokens", rc.analyze_tokens, sz);
  get("bench_batch", rc.bench_batch, sz);
  get("bench_reps", rc.bench_reps, sz);
  get("bench_warmup", rc.bench_warmup, sz);
  get("bench_train_reps", rc.bench_train_reps, sz);
  if (auto it = kv.find("out_dir"); it != kv.end()) rc.out_dir = it->second;

  // Re-raise validation failures with the key that caused them.
  auto check = [](const char* key, bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(key, std::string(key) + ": " + msg);
  };
  check("warmup", t.warmup >= 1, "must be >= 1");
  check("lr_scale", t.lr_scale > 0.0, "must be positive");
  check("batch_tokens", t.batch_tokens >= 1, "must be >= 1");
  check("label_smoothing", t.label_smoothing >= 0.0 && t.label_smoothing < 1.0, "must lie in [0,1)");
  check("adam_beta1", t.adam.beta1 >= 0.0 && t.adam.beta1 < 1.0, "must lie in [0,1)");
  check("adam_beta2", t.adam.beta2 >= 0.0 && t.adam.beta2 < 1.0, "must lie in [0,1)");
  check("adam_eps", t.adam.eps > 0.0, "must be positive");
  check("clip_norm", t.adam.clip_norm >= 0.0, "must be >= 0");
  check("dynamics_window", t.dynamics_window >= 1, "must be >= 1");
  check("min_len", rc.task.min_len >= 1 && rc.task.min_len <= rc.task.max_len,
        "need 1 <= min_len <= max_len");
  check("batch_tokens", t.batch_tokens >= rc.task.max_len + 1,
        "must hold the longest target (max_len + 1)");
  check("beam", rc.beam >= 1, "must be >= 1");
  check("len_penalty", rc.len_penalty >= 0.0, "must be >= 0");
  check("analyze_tokens", rc.analyze_tokens >= 1, "must be >= 1");
  check("bench_batch", rc.bench_batch >= 1, "must be >= 1");
  check("bench_reps", rc.bench_reps >= 1, "must be >= 1");
  return rc;
}

}  // namespace deepnmt
