#include "deepnmt/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "deepnmt/config.hpp"

namespace deepnmt {

namespace {

namespace fs = std::filesystem;

RunConfig load_config(const std::string& config_path, const std::vector<std::string>& extras) {
  std::map<std::string, std::string> kv;
  if (!config_path.empty()) kv = read_config_file(config_path);
  for (auto& [k, v] : parse_overrides(extras)) kv[k] = v;
  return parse_run_config(kv);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << text;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  Rng init = Rng(rc.train.seed).fork(0);
  Model model = build(rc.model, init);
  TrainHooks hooks;
  hooks.out_dir = rc.out_dir;
  TrainResult result = train(model, rc.task, rc.train, hooks);
  const MetricsRow& last = result.metrics.back();
  out << "trained " << result.steps_run << " steps: loss " << last.loss << ", token_acc "
      << last.token_acc << "\n";
  out << "wrote " << (rc.out_dir / "metrics.csv").string() << ", "
      << (rc.out_dir / "dynamics.csv").string() << "\n";
  return kExitOk;
}

int cmd_analyze(const RunConfig& rc, std::ostream& out) {
  if (rc.model.layout != Layout::post_norm) {
    throw UnsupportedLayoutError(
        "analyze: unsupported layout 'pre'; error-signal ratios are defined for the post-norm layout");
  }
  Rng data = Rng(rc.train.seed).fork(3);
  const auto pairs = sample_tokens(rc.task, data, rc.analyze_tokens);
  const Batch batch = make_batch(pairs);
  std::vector<std::pair<std::string, RatioReport>> runs;
  for (InitPolicy policy : {InitPolicy::glorot, InitPolicy::ds_init}) {
    ModelConfig cfg = rc.model;
    cfg.init = policy;
    Rng init = Rng(rc.train.seed).fork(0);
    const Model model = build(cfg, init);
    runs.emplace_back(std::string(to_string(policy)),
                      measure_ratios(model, batch, rc.train.label_smoothing));
  }
  fs::create_directories(rc.out_dir);
  std::ostringstream ratios, grads;
  write_ratios_csv(ratios, runs);
  write_gradnorms_csv(grads, runs);
  write_text(rc.out_dir / "ratios.csv", ratios.str());
  write_text(rc.out_dir / "gradnorms.csv", grads.str());
  out << ratios.str();
  out << "wrote " << (rc.out_dir / "ratios.csv").string() << ", "
      << (rc.out_dir / "gradnorms.csv").string() << "\n";
  return kExitOk;
}

std::vector<std::vector<int>> read_sources(std::istream& is) {
  std::vector<std::vector<int>> lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<int> ids;
    std::string tok;
    while (ls >> tok) {
      int v = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size()) {
        throw std::runtime_error("input line " + std::to_string(lineno) + ": '" + tok +
                                 "' is not a token id");
      }
      ids.push_back(v);
    }
    lines.push_back(std::move(ids));
  }
  return lines;
}

int cmd_decode(const std::string& checkpoint, const std::string& input, const std::string& output,
               const std::vector<std::string>& extras, std::ostream& out) {
  std::map<std::string, std::string> kv = parse_overrides(extras);
  std::size_t beam = 4;
  double len_penalty = 0.6;
  for (const auto& [k, v] : kv) {
    if (k == "beam") {
      beam = parse_run_config({{"layers", "1"}, {"beam", v}}).beam;
    } else if (k == "len_penalty") {
      len_penalty = parse_run_config({{"layers", "1"}, {"len_penalty", v}}).len_penalty;
    } else {
      throw ConfigError(k, "decode accepts only --beam and --len_penalty overrides, got '" + k + "'");
    }
  }
  const CheckpointBundle bundle = load_checkpoint(checkpoint);
  const Model model = bundle.model();
  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot read input '" + input + "'");
  const auto sources = read_sources(in);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (int id : sources[i]) {
      if (id < kFirstSymbol || static_cast<std::size_t>(id) >= model.config.src_vocab) {
        throw std::runtime_error("input line " + std::to_string(i + 1) + ": token id " +
                                 std::to_string(id) + " outside the model's symbol range [" +
                                 std::to_string(kFirstSymbol) + ", " +
                                 std::to_string(model.config.src_vocab) + ")");
      }
    }
  }
  std::ostringstream text;
  for (const auto& src : sources) {
    if (src.empty()) {
      text << "\n";
      continue;
    }
    const Hypothesis h = beam_search(model, src, beam, len_penalty);
    for (std::size_t j = 0; j < h.tokens.size(); ++j) text << (j ? " " : "") << h.tokens[j];
    text << "\n";
  }
  if (output.empty()) {
    out << text.str();
  } else {
    write_text(output, text.str());
  }
  return kExitOk;
}

int cmd_bench(const RunConfig& rc, std::ostream& out) {
  Rng data = Rng(rc.train.seed).fork(4);
  std::vector<std::vector<int>> sources;
  for (std::size_t i = 0; i < rc.bench_batch; ++i) {
    SequencePair p = sample_pair(rc.task, data);
    p.source.pop_back();
    sources.push_back(std::move(p.source));
  }
  const DecoderVariant variants[] = {DecoderVariant::baseline, DecoderVariant::matt,
                                     DecoderVariant::matt_self, DecoderVariant::aan_original};
  BenchOptions opts;
  opts.reps = rc.bench_reps;
  opts.warmup = rc.bench_warmup;
  opts.train_reps = rc.bench_train_reps;
  opts.train_batch_tokens = rc.train.batch_tokens;
  const auto rows = bench_decode(rc.model, variants, sources, opts, rc.train.seed);
  fs::create_directories(rc.out_dir);
  std::ostringstream csv;
  write_bench_csv(csv, rows);
  write_text(rc.out_dir / "bench.csv", csv.str());
  out << csv.str() << "wrote " << (rc.out_dir / "bench.csv").string() << "\n";
  return kExitOk;
}

int cmd_avg(const std::string& out_path, const std::vector<std::string>& inputs, std::ostream& out) {
  std::vector<CheckpointBundle> bundles;
  for (const auto& p : inputs) bundles.push_back(load_checkpoint(p));
  CheckpointBundle result;
  result.config = bundles.front().config;
  result.params = average_checkpoints(bundles);
  for (const auto& b : bundles) result.step = std::max(result.step, b.step);
  save_checkpoint(out_path, result);
  out << "averaged " << bundles.size() << " checkpoints into " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep Transformer laboratory: DS-Init, merged attention, gradient probes"};
  app.require_subcommand(1);
  std::string config_path, checkpoint, input, output, avg_out;
  std::vector<std::string> avg_in;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "key=value config file");
    sub->allow_extras();
  };
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a synthetic task");
  CLI::App* analyze_cmd = app.add_subcommand("analyze", "gradient-flow ratios at initialization");
  CLI::App* bench_cmd = app.add_subcommand("bench", "decoding throughput of decoder variants");
  add_config(train_cmd);
  add_config(analyze_cmd);
  add_config(bench_cmd);
  CLI::App* decode_cmd = app.add_subcommand("decode", "decode token-id lines with a checkpoint");
  decode_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  decode_cmd->add_option("--input", input, "input file, one sequence per line")->required();
  decode_cmd->add_option("--output", output, "output file (default stdout)");
  decode_cmd->allow_extras();
  CLI::App* avg_cmd = app.add_subcommand("avg", "average checkpoints");
  avg_cmd->add_option("out", avg_out, "output checkpoint")->required();
  avg_cmd->add_option("inputs", avg_in, "input checkpoints")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(load_config(config_path, train_cmd->remaining()), out);
    if (*analyze_cmd) return cmd_analyze(load_config(config_path, analyze_cmd->remaining()), out);
    if (*bench_cmd) return cmd_bench(load_config(config_path, bench_cmd->remaining()), out);
    if (*decode_cmd) return cmd_decode(checkpoint, input, output, decode_cmd->remaining(), out);
    if (*avg_cmd) return cmd_avg(avg_out, avg_in, out);
  } catch (const ConfigError& e) {
    err << "config error [" << e.key() << "]: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UnsupportedLayoutError& e) {
    err << "config error [layout]: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace deepnmt
