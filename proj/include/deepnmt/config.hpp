#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "deepnmt/infer.hpp"
#include "deepnmt/trainer.hpp"

namespace deepnmt {

/// Everything one command needs, parsed from flat key=value settings.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  TaskSpec task;
  std::size_t beam = 4;
  double len_penalty = 0.6;
  std::size_t analyze_tokens = 3000;
  std::size_t bench_batch = 8;
  std::size_t bench_reps = 5;
  std::size_t bench_warmup = 3;
  std::size_t bench_train_reps = 3;
  std::filesystem::path out_dir = "out";
};

/// Reads `key = value` lines; `#` starts a comment. Malformed lines raise
/// ConfigError naming the line.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Turns `--key value` / `--key=value` pairs into settings.
std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& args);

/// Validates every key; unknown keys and a missing `layers` raise ConfigError.
RunConfig parse_run_config(const std::map<std::string, std::string>& kv);

/// Names of all accepted keys.
const std::vector<std::string>& config_keys();

}  // namespace deepnmt
