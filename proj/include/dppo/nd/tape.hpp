#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "dppo/nd/tensor.hpp"

namespace dppo::nd {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const;

  Tape& tape() const;
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Single-use reverse-mode tape. Nodes are appended in evaluation order, so the
// reverse of insertion order is a valid topological order for backward().
//
// Parameters are bound by reference: backward() accumulates into the bound
// tensor's grad buffer. A tape can be differentiated exactly once.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Owned constant (no gradient).
  Var constant(Tensor value);
  // Borrowed constant; `value` must outlive the tape.
  Var constant_ref(const Tensor& value);
  // Trainable leaf; `param` must outlive the tape.
  Var parameter(Tensor& param);

  // Appends an op result. `fn` is invoked during backward() with this node's
  // gradient available through grad(self).
  Var record(const char* op, Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(const char* op, Tensor value, std::span<const Var> parents, BackwardFn fn);

  void backward(const Var& loss);
  bool consumed() const { return consumed_; }

  const Tensor& value(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  // Gradient accumulator of a node, allocated on first access.
  std::span<double> grad(int id);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    Tensor* param = nullptr;
    bool requires_grad = false;
    std::vector<double> grad;
    BackwardFn backward;
  };

  Var push(Node node);
  void check_parent(const Var& v) const;

  std::deque<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace dppo::nd
