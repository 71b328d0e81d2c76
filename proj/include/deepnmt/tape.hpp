#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "deepnmt/tensor.hpp"

namespace deepnmt {

/// Handle to a node on a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const noexcept { return id != kNone; }
};

/// Recorded computation for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so every input id is smaller than
/// the id of its consumer. backward() walks the nodes once, from the loss
/// down to id 0. Gradients of intermediate nodes are released as soon as
/// they have been propagated unless the node was marked with retain();
/// parameter and leaf gradients are always kept.
///
/// A tape is single-use: record, call backward() once, read gradients.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  /// Value that never receives a gradient.
  Var constant(Tensor value);
  /// Differentiable input owned by the tape.
  Var leaf(Tensor value);
  /// Differentiable parameter that aliases external storage. Repeated calls
  /// with the same storage return the same node, so shared matrices
  /// accumulate one gradient. The storage must outlive the tape.
  Var param(const std::string& name, const Tensor& storage);

  /// Appends an op node. `fn` may be empty for ops with no differentiable input.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn fn, const char* op);

  const Tensor& value(Var v) const;
  /// Gradient accumulated at v; empty if none reached it.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  const std::vector<std::size_t>& inputs(Var v) const { return node(v).inputs; }
  const char* op(Var v) const { return node(v).op; }

  /// Keep the gradient of v after backward (used for probe points).
  void retain(Var v);

  /// Gradient buffer of v for accumulation, allocated as zeros on first use.
  /// Returns nullptr when v does not require a gradient.
  Tensor* grad_slot(Var v);
  /// Upstream gradient of the node currently being differentiated.
  const Tensor& upstream(std::size_t self) const { return nodes_[self].grad; }

  /// Differentiates `loss` (a single-element node) scaled by `upstream`.
  void backward(Var loss, double upstream = 1.0);

  /// Gradients of every parameter node, keyed by the name passed to param().
  std::map<std::string, Tensor> param_grads() const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    const char* op = "";
    bool requires_grad = false;
    bool retain = false;
    std::string name;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> params_;
  bool differentiated_ = false;
};

}  // namespace deepnmt
