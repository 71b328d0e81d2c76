#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "deepnmt/checkpoint.hpp"
#include "deepnmt/probes.hpp"
#include "deepnmt/tasks.hpp"

namespace deepnmt {

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& message)
      : std::runtime_error(message), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t warmup = 4000;
  double lr_scale = 1.0;  ///< constant multiplier on the warmup schedule
  std::size_t batch_tokens = 512;
  double label_smoothing = 0.1;
  AdamConfig adam;
  std::size_t checkpoint_every = 500;  ///< 0 disables checkpoints
  std::size_t keep_checkpoints = 5;    ///< bundles kept in memory for averaging
  std::size_t dynamics_window = 50;
  std::uint64_t seed = 1;

  void validate() const;
};

struct MetricsRow {
  std::size_t step = 0;
  double loss = 0.0;
  double token_acc = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  DynamicsLog dynamics{1};
  std::vector<CheckpointBundle> checkpoints;  ///< most recent last
  std::size_t steps_run = 0;
  bool stopped_early = false;
};

struct TrainHooks {
  /// Called after every update; returning true ends training.
  std::function<bool(const MetricsRow&, const Model&)> after_step;
  /// Directory receiving metrics.csv, dynamics.csv and ckpt_<step>.bin.
  std::optional<std::filesystem::path> out_dir;
};

/// Runs Adam on label-smoothed cross-entropy over batches drawn from `task`.
/// The data stream and dropout draw from streams forked off `config.seed`.
TrainResult train(Model& model, const TaskSpec& task, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// One forward/backward on `batch`. Returns loss and token accuracy and
/// fills `grads`.
struct StepStats {
  double loss = 0.0;
  double token_acc = 0.0;
};
StepStats compute_gradients(const Model& model, const Batch& batch, double label_smoothing,
                            Rng* dropout_rng, std::map<std::string, Tensor>& grads);

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);

}  // namespace deepnmt
