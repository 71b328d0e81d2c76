#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "deepnmt/batch.hpp"
#include "deepnmt/init.hpp"
#include "deepnmt/layers.hpp"

namespace deepnmt {

enum class Layout { post_norm, pre_norm };
enum class DecoderVariant { baseline, matt, matt_self, aan_original };
enum class Stack { encoder, decoder };
enum class Sublayer { self, cross, ffn, merged };

std::string_view to_string(Layout layout);
std::string_view to_string(DecoderVariant variant);
std::string_view to_string(Stack stack);
std::string_view to_string(Sublayer kind);
/// "post" / "post_norm", "pre" / "pre_norm".
Layout parse_layout(std::string_view name);
/// "baseline", "matt", "matt_self", "aan" / "aan_original".
DecoderVariant parse_decoder_variant(std::string_view name);

/// Invalid model configuration; `key()` names the offending setting.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::invalid_argument(message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

struct ModelConfig {
  std::size_t layers = 6;  ///< per stack
  std::size_t dim = 64;
  std::size_t ffn_dim = 256;
  std::size_t heads = 4;
  std::size_t src_vocab = 64;
  std::size_t tgt_vocab = 64;
  std::size_t aan_ffn_dim = 0;  ///< inner width of the original-AAN FFN; 0 means dim
  Layout layout = Layout::post_norm;
  DecoderVariant decoder = DecoderVariant::baseline;
  InitPolicy init = InitPolicy::glorot;
  double alpha = 1.0;
  double sigma = 0.02;
  bool ds_encoder = true;  ///< apply depth scaling to the encoder stack
  bool ds_decoder = true;
  double dp_r = 0.1;
  double dp_a = 0.1;
  bool share_target_softmax = true;
  double ln_eps = kLayerNormEps;

  std::size_t aan_inner() const noexcept { return aan_ffn_dim ? aan_ffn_dim : dim; }
  /// Throws ConfigError naming the first invalid key.
  void validate() const;

  std::map<std::string, std::string> to_kv() const;
  /// Reads the keys produced by to_kv(); unknown keys raise ConfigError.
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
};

/// Named parameter tensors with value semantics.
///
/// Names follow stack.layer.sublayer.matrix (e.g. "dec.3.cross.wq"). An
/// alias name resolves to another entry's storage, so writes through either
/// name are visible through both; copies of a Parameters object preserve
/// aliasing but never share storage with the source.
class Parameters {
 public:
  Parameters() = default;
  Parameters(const Parameters& other);
  Parameters& operator=(const Parameters& other);
  Parameters(Parameters&&) noexcept = default;
  Parameters& operator=(Parameters&&) noexcept = default;

  void add(const std::string& name, Tensor value, InitRecord init = {});
  void alias(const std::string& name, const std::string& target);

  bool contains(const std::string& name) const;
  bool is_alias(const std::string& name) const { return alias_.count(name) != 0; }
  const std::string& canonical(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  const InitRecord& init(const std::string& name) const;

  /// Every name, aliases included, in insertion order.
  const std::vector<std::string>& names() const noexcept { return order_; }
  /// Names that own storage, in insertion order.
  std::vector<std::string> storage_names() const;
  std::size_t size() const noexcept { return order_.size(); }
  bool empty() const noexcept { return order_.empty(); }

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::shared_ptr<Tensor>> tensors_;
  std::map<std::string, std::string> alias_;
  std::map<std::string, InitRecord> init_;
};

struct Model {
  ModelConfig config;
  Parameters params;
};

/// Allocates and initializes every parameter. Weights inside layer l use
/// depth l (1-based within the stack); embeddings use the undiscounted
/// policy; biases and LN bias start at 0, LN gain at 1.
Model build(const ModelConfig& config, Rng& rng);

/// Total scalar count over distinct storage (aliases counted once).
std::size_t count_params(const Parameters& params);
/// Count over storage whose name starts with one of the prefixes.
std::size_t count_params(const Parameters& params, std::initializer_list<std::string_view> prefixes);
/// Attention-projection parameters of one decoder layer (no LN, no FFN).
std::size_t decoder_attention_params(const Model& model, std::size_t layer);

std::string param_name(Stack stack, std::size_t layer, std::string_view sublayer,
                       std::string_view matrix);

/// One residual block boundary: z (block input), r (residual sum), o (LN output).
struct ProbePoint {
  Stack stack;
  std::size_t layer;
  Sublayer kind;
  Var z, r, o;
};

struct ForwardOptions {
  Mode mode = Mode::eval;
  Rng* rng = nullptr;  ///< dropout source; required in train mode when rates are nonzero
  std::vector<ProbePoint>* probes = nullptr;
};

/// Binds parameter names to tape nodes on first use.
class ParamBinder {
 public:
  ParamBinder(Tape& tape, const Parameters& params) : tape_(tape), params_(params) {}
  Var operator()(const std::string& name);

 private:
  Tape& tape_;
  const Parameters& params_;
};

/// Encoder output H^L, [batch*src_len x dim].
Var encode(Tape& t, ParamBinder& p, const Model& model, const Batch& batch,
           const ForwardOptions& options);
/// Teacher-forced decoder logits, [batch*tgt_len x tgt_vocab].
Var decode_train(Tape& t, ParamBinder& p, const Model& model, const Batch& batch, Var memory,
                 const ForwardOptions& options);

/// Label-smoothed loss of a batch; optionally exposes the logits node.
Var batch_loss(Tape& t, ParamBinder& p, const Model& model, const Batch& batch,
               double label_smoothing, const ForwardOptions& options, Var* logits = nullptr);

/// Eval-mode conveniences that do not keep a tape.
Tensor encode(const Model& model, const Batch& batch);
Tensor decode_train(const Model& model, const Batch& batch);
double batch_loss(const Model& model, const Batch& batch, double label_smoothing);

/// Fraction of non-pad target positions whose argmax logit equals the gold id.
double token_accuracy(const Tensor& logits, std::span<const int> gold);
std::size_t correct_tokens(const Tensor& logits, std::span<const int> gold);

}  // namespace deepnmt
