#include "dppo/nd/tape.hpp"

#include <string>

namespace dppo::nd {

const Tensor& Var::value() const { return tape().value(id_); }

double Var::item() const {
  const Tensor& t = value();
  if (t.size() != 1) throw ShapeError("item() on non-scalar of shape " + shape_string(t.shape()));
  return t[0];
}

Tape& Var::tape() const {
  if (tape_ == nullptr) throw std::logic_error("use of an untaped Var");
  return *tape_;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::check_parent(const Var& v) const {
  if (v.tape_ != this) throw std::logic_error("Var belongs to a different tape");
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.borrowed = &value;
  return push(std::move(n));
}

Var Tape::parameter(Tensor& param) {
  Node n;
  n.borrowed = &param;
  n.param = &param;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(fn));
}

Var Tape::record(const char* op, Tensor value, std::span<const Var> parents, BackwardFn fn) {
  if (consumed_) throw std::logic_error("recording on a tape that was already differentiated");
  if (!value.all_finite()) throw NonFiniteError(std::string("non-finite output of op '") + op + "'");
  Node n;
  n.owned = std::move(value);
  for (const Var& p : parents) {
    check_parent(p);
    n.requires_grad = n.requires_grad || requires_grad(p.id());
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(id));
  return n.borrowed ? *n.borrowed : n.owned;
}

std::span<double> Tape::grad(int id) {
  Node& n = nodes_.at(static_cast<std::size_t>(id));
  if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (!loss.valid()) throw std::logic_error("backward on an untaped value");
  check_parent(loss);
  if (consumed_) throw std::logic_error("backward called twice on the same tape; re-run forward");
  if (value(loss.id()).size() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + shape_string(value(loss.id()).shape()));
  }
  if (!requires_grad(loss.id())) throw std::logic_error("loss does not depend on any parameter");
  consumed_ = true;

  grad(loss.id())[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.param != nullptr) {
      std::span<double> g = n.param->grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

}  // namespace dppo::nd
