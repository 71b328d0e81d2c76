#include "deepnmt/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

namespace deepnmt {

void TrainConfig::validate() const {
  if (warmup < 1) throw ParameterError("warmup must be >= 1");
  if (!(lr_scale > 0.0)) throw ParameterError("lr_scale must be positive");
  if (batch_tokens < 1) throw ParameterError("batch_tokens must be >= 1");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw ParameterError("label_smoothing must lie in [0,1)");
  }
  if (dynamics_window < 1) throw ParameterError("dynamics_window must be >= 1");
  adam.validate();
}

StepStats compute_gradients(const Model& model, const Batch& batch, double label_smoothing,
                            Rng* dropout_rng, std::map<std::string, Tensor>& grads) {
  Tape t;
  ParamBinder p(t, model.params);
  ForwardOptions opts;
  opts.mode = dropout_rng ? Mode::train : Mode::eval;
  opts.rng = dropout_rng;
  Var logits;
  Var loss = batch_loss(t, p, model, batch, label_smoothing, opts, &logits);
  StepStats s;
  s.loss = t.value(loss).item();
  s.token_acc = token_accuracy(t.value(logits), batch.tgt_out);
  if (std::isfinite(s.loss)) {
    t.backward(loss);
    grads = t.param_grads();
  }
  return s;
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fn) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  fn(os);
}

}  // namespace

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << "step,loss,token_acc,lr,grad_norm\n";
  for (const auto& r : rows) {
    os << r.step << ',' << num(r.loss) << ',' << num(r.token_acc) << ',' << num(r.lr) << ','
       << num(r.grad_norm) << '\n';
  }
}

TrainResult train(Model& model, const TaskSpec& task, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  model.config.validate();
  if (task.vocab > model.config.src_vocab || task.vocab > model.config.tgt_vocab) {
    throw ParameterError("task vocabulary " + std::to_string(task.vocab) +
                         " exceeds the model vocabulary");
  }
  const Rng root(config.seed);
  BatchStream stream(task, config.batch_tokens, root.fork(1));
  Rng dropout_rng = root.fork(2);
  const bool use_dropout = model.config.dp_r > 0.0 || model.config.dp_a > 0.0;

  TrainResult result;
  result.dynamics = DynamicsLog(model.config.layers, config.dynamics_window);
  OptimizerState state;
  if (hooks.out_dir) std::filesystem::create_directories(*hooks.out_dir);

  for (std::size_t step = 1; step <= config.steps; ++step) {
    const Batch batch = stream.next();
    std::map<std::string, Tensor> grads;
    StepStats s;
    try {
      s = compute_gradients(model, batch, config.label_smoothing,
                            use_dropout ? &dropout_rng : nullptr, grads);
    } catch (const NonFiniteError&) {
      // Non-finite weights surface as operand errors inside the forward pass.
      s.loss = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(s.loss)) {
      throw DivergenceError(step, "non-finite loss at step " + std::to_string(step) +
                                      " (last finite loss " +
                                      (result.metrics.empty() ? std::string("n/a")
                                                              : num(result.metrics.back().loss)) +
                                      ")");
    }
    result.dynamics.add(group_layer_norms(model.config, grads));
    MetricsRow row;
    row.step = step;
    row.loss = s.loss;
    row.token_acc = s.token_acc;
    row.lr = config.lr_scale * lr_schedule(step, model.config.dim, config.warmup);
    row.grad_norm = adam_step(model.params, grads, state, row.lr, config.adam);
    result.metrics.push_back(row);
    result.steps_run = step;

    const bool stop = hooks.after_step && hooks.after_step(row, model);
    if ((config.checkpoint_every && step % config.checkpoint_every == 0) || stop ||
        step == config.steps) {
      CheckpointBundle bundle{model.config, model.params, state, step};
      if (hooks.out_dir) {
        save_checkpoint(*hooks.out_dir / ("ckpt_" + std::to_string(step) + ".bin"), bundle);
      }
      if (config.keep_checkpoints) {
        result.checkpoints.push_back(std::move(bundle));
        if (result.checkpoints.size() > config.keep_checkpoints) {
          result.checkpoints.erase(result.checkpoints.begin());
        }
      }
    }
    if (stop) {
      result.stopped_early = step < config.steps;
      break;
    }
  }
  result.dynamics.flush();
  if (hooks.out_dir) {
    write_file(*hooks.out_dir / "metrics.csv",
               [&](std::ostream& os) { write_metrics_csv(os, result.metrics); });
    write_file(*hooks.out_dir / "dynamics.csv",
               [&](std::ostream& os) { write_dynamics_csv(os, result.dynamics); });
  }
  return result;
}

}  // namespace deepnmt
