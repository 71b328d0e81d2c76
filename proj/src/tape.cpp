#include "deepnmt/tape.hpp"

namespace deepnmt {

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("invalid tape variable");
  return nodes_[v.id];
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw ContractError("invalid tape variable");
  return nodes_[v.id];
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = "leaf";
  n.requires_grad = true;
  n.retain = true;
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Var Tape::param(const std::string& name, const Tensor& storage) {
  if (auto it = params_.find(&storage); it != params_.end()) return {it->second};
  Node n;
  n.external = &storage;
  n.op = "param";
  n.requires_grad = true;
  n.retain = true;
  n.name = name;
  nodes_.push_back(std::move(n));
  params_.emplace(&storage, nodes_.size() - 1);
  return {nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn fn, const char* op) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    const Node& src = node(in);
    n.inputs.push_back(in.id);
    n.requires_grad = n.requires_grad || src.requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.external ? *n.external : n.value;
}

const Tensor& Tape::grad(Var v) const { return node(v).grad; }

void Tape::retain(Var v) { node(v).retain = true; }

Tensor* Tape::grad_slot(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor(value(v).shape());
  return &n.grad;
}

void Tape::backward(Var loss, double upstream) {
  if (differentiated_) throw ContractError("backward() called twice on the same tape");
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(lv.shape()));
  }
  differentiated_ = true;
  Node& ln = node(loss);
  if (!ln.requires_grad) return;
  ln.grad = Tensor(lv.shape(), upstream);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (!n.retain) n.grad = Tensor();
  }
}

std::map<std::string, Tensor> Tape::param_grads() const {
  std::map<std::string, Tensor> out;
  for (const auto& [storage, id] : params_) {
    const Node& n = nodes_[id];
    out.emplace(n.name, n.grad.empty() ? Tensor(storage->shape()) : n.grad);
  }
  return out;
}

}  // namespace deepnmt
