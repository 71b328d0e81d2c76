#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepnmt/model.hpp"

namespace deepnmt {

/// Probing was requested on a layout whose blocks are not RC-then-LN.
class UnsupportedLayoutError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A backward signal vanished where a ratio needs it as denominator.
class DegenerateSignalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Backward-signal norms at one residual block.
struct ProbeRecord {
  Stack stack = Stack::encoder;
  std::size_t layer = 0;
  Sublayer kind = Sublayer::self;
  double norm_o = 0.0;  ///< ||delta_o||, gradient at the LN output
  double norm_r = 0.0;  ///< ||delta_r||, gradient at the residual sum
  double norm_z = 0.0;  ///< ||delta_z||, gradient at the block input
  double var_r = 0.0;   ///< population variance of r over non-pad rows

  double beta_ln() const { return norm_r / norm_o; }
  double beta_rc() const { return norm_z / norm_r; }
  /// Computed from the end norms, not as beta_ln() * beta_rc().
  double beta() const { return norm_z / norm_o; }
};

/// Per-(stack, sublayer) averages over layers.
struct RatioCell {
  Stack stack = Stack::encoder;
  Sublayer kind = Sublayer::self;
  std::size_t count = 0;
  double beta_ln = 0.0;
  double beta_rc = 0.0;
  double beta = 0.0;
  double var_r = 0.0;
};

struct LayerGradNorm {
  Stack stack = Stack::encoder;
  std::size_t layer = 0;
  double norm = 0.0;
};

struct RatioReport {
  std::vector<ProbeRecord> records;
  std::vector<RatioCell> cells;  ///< enc then dec, sublayers in forward order
  std::vector<LayerGradNorm> grad_norms;
  double loss = 0.0;
};

/// Checks the model can be probed; throws UnsupportedLayoutError for pre-norm.
/// Returns the number of probe triples one forward pass registers.
std::size_t attach_probes(const ModelConfig& config);

/// One eval-mode forward/backward of the label-smoothed loss with every
/// residual block probed. Throws DegenerateSignalError when some delta_o or
/// delta_r is exactly zero.
RatioReport measure_ratios(const Model& model, const Batch& batch, double label_smoothing = 0.1);

/// L2 norm of all parameter gradients of each layer (embeddings and final
/// norms excluded), encoder layers first. The loss is multiplied by
/// `loss_scale` before differentiation.
std::vector<LayerGradNorm> layer_gradient_norms(const Model& model, const Batch& batch,
                                                double label_smoothing = 0.1,
                                                double loss_scale = 1.0);

/// Same grouping applied to an existing gradient map.
std::vector<LayerGradNorm> group_layer_norms(const ModelConfig& config,
                                             const std::map<std::string, Tensor>& grads);

std::vector<RatioCell> average_cells(const std::vector<ProbeRecord>& records);

/// Windowed means of first/last-layer gradient norms during training.
class DynamicsLog {
 public:
  explicit DynamicsLog(std::size_t layers, std::size_t window = 50);
  /// Adds one step; `norms` must come from group_layer_norms.
  void add(const std::vector<LayerGradNorm>& norms);
  /// Closes a partially filled window.
  void flush();

  struct Row {
    std::size_t window;
    Stack stack;
    std::size_t layer;
    double norm;
  };
  const std::vector<Row>& rows() const noexcept { return rows_; }
  std::size_t windows() const noexcept { return windows_; }

 private:
  std::size_t layers_;
  std::size_t window_;
  std::size_t filled_ = 0;
  std::size_t windows_ = 0;
  double acc_[4] = {0, 0, 0, 0};  // enc 1, enc L, dec 1, dec L
  std::vector<Row> rows_;
};

/// CSV emitters; each run contributes rows tagged by its init label.
void write_ratios_csv(std::ostream& os, const std::vector<std::pair<std::string, RatioReport>>& runs);
void write_gradnorms_csv(std::ostream& os,
                         const std::vector<std::pair<std::string, RatioReport>>& runs);
void write_dynamics_csv(std::ostream& os, const DynamicsLog& log);

}  // namespace deepnmt
