// Copyright 2026 The promptse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROMPTSE_NUMERICS_TAPE_H_
#define PROMPTSE_NUMERICS_TAPE_H_

#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "promptse/numerics/tensor.h"

namespace promptse {

template <typename T>
class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
template <typename T>
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape<T>* tape() const { return tape_; }
  int id() const { return id_; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  int64_t dim(int axis) const { return value().dim(axis); }
  int rank() const { return value().rank(); }
  bool requires_grad() const;

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

// Linear record of executed operations. Nodes are appended in execution
// order, which is a topological order of the expression DAG; Backward walks
// it in reverse exactly once. A tape is used for one forward/backward pass.
template <typename T>
class Tape {
 public:
  // Receives the gradient and value of the node's output and accumulates
  // into the inputs' gradients.
  using BackwardFn =
      std::function<void(const Tensor<T>& out_grad, const Tensor<T>& out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> Constant(Tensor<T> value) {
    return Append(std::move(value), false, "constant", nullptr);
  }
  Var<T> Variable(Tensor<T> value) {
    return Append(std::move(value), true, "variable", nullptr);
  }

  // Records an op output. The node requires grad iff any input does; when
  // none does, `backward` is dropped.
  Var<T> Record(const char* op, Tensor<T> value,
                const std::vector<Var<T>>& inputs, BackwardFn backward) {
    bool needs = false;
    for (const auto& v : inputs) {
      needs = needs || (v.valid() && v.requires_grad());
    }
    return Append(std::move(value), needs, op,
                  needs ? std::move(backward) : nullptr);
  }

  static bool AnyRequiresGrad(const std::vector<Var<T>>& inputs) {
    for (const auto& v : inputs) {
      if (v.valid() && v.requires_grad()) return true;
    }
    return false;
  }

  const Tensor<T>& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  const std::string& op_name(int id) const { return nodes_[id].op; }

  // Gradient buffer of `v`, zero-allocated on first use.
  Tensor<T>& GradRef(const Var<T>& v) {
    Node& n = nodes_[v.id()];
    if (n.grad.shape() != n.value.shape() || n.grad.empty()) {
      n.grad = Tensor<T>(n.value.shape());
    }
    return n.grad;
  }

  // Accumulated gradient of `v`; zeros when nothing flowed into it.
  Tensor<T> Grad(const Var<T>& v) const {
    const Node& n = nodes_[v.id()];
    if (n.grad.empty()) return Tensor<T>(n.value.shape());
    return n.grad;
  }

  // Reverse pass from a single-element output with upstream gradient 1.
  void Backward(const Var<T>& output);

  // Negates the upstream gradient seen by every node recorded under `op`
  // during Backward. Used for negative-control checks.
  void InjectFault(std::string op) { fault_op_ = std::move(op); }

  size_t size() const { return nodes_.size(); }
  // Number of backward closures run by the last Backward call.
  size_t backward_visits() const { return backward_visits_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::string op;
    BackwardFn backward;
  };

  Var<T> Append(Tensor<T> value, bool requires_grad, const char* op,
                BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.op = op;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::deque<Node> nodes_;
  std::string fault_op_;
  size_t backward_visits_ = 0;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

template <typename T>
void Tape<T>::Backward(const Var<T>& output) {
  if (output.tape() != this) throw Error("Backward: variable from another tape");
  if (output.value().size() != 1) {
    throw ShapeError("Backward requires a single-element output, got " +
                     ShapeString(output.shape()));
  }
  backward_visits_ = 0;
  GradRef(output)[0] = T(1);
  for (int id = output.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    ++backward_visits_;
    if (!fault_op_.empty() && n.op == fault_op_) {
      Tensor<T> flipped = n.grad;
      for (auto& g : flipped.values()) g = -g;
      n.backward(flipped, n.value);
    } else {
      n.backward(n.grad, n.value);
    }
  }
}

}  // namespace promptse

#endif  // PROMPTSE_NUMERICS_TAPE_H_
