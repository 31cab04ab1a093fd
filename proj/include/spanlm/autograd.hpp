// Copyright 2026 The spanlm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "spanlm/tensor.hpp"

namespace spanlm {

// A learnable tensor with its accumulated gradient. Shared by pointer so
// that two model views (e.g. generator and discriminator) can hold the same
// storage.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
using ParameterPtr = std::shared_ptr<Parameter<T>>;

template <typename T>
ParameterPtr<T> make_parameter(std::string name, Tensor<T> value) {
  return std::make_shared<Parameter<T>>(std::move(name), std::move(value));
}

template <typename T>
class Tape;

// Handle to a node recorded on a Tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Eager reverse-mode tape. Values are computed when an op is recorded;
// backward() walks the nodes once in reverse insertion order, which is a
// valid reverse topological order because inputs always precede outputs.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) {
    Node node;
    node.owned = std::move(value);
    nodes_.push_back(std::move(node));
    return Var<T>(this, nodes_.size() - 1);
  }

  // Leaf bound to a parameter. The node reads the parameter's storage in
  // place; recording the same parameter twice returns the same node.
  Var<T> parameter(const ParameterPtr<T>& p) {
    auto it = param_nodes_.find(p.get());
    if (it != param_nodes_.end()) return Var<T>(this, it->second);
    Node node;
    node.ref = &p->value;
    node.param = p.get();
    node.needs_grad = true;
    nodes_.push_back(std::move(node));
    param_nodes_.emplace(p.get(), nodes_.size() - 1);
    return Var<T>(this, nodes_.size() - 1);
  }

  Var<T> record(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn backward) {
    Node node;
    node.owned = std::move(value);
    for (std::size_t in : inputs) node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
    node.inputs = std::move(inputs);
    if (node.needs_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var<T>(this, nodes_.size() - 1);
  }

  const Tensor<T>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.owned;
  }

  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  // Gradient buffer of a node, allocated as zeros on first use.
  Tensor<T>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.shape() != value(id).shape() || n.grad.size() != value(id).size()) {
      n.grad = Tensor<T>(value(id).shape());
    }
    n.has_grad = true;
    return n.grad;
  }

  bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }

  // Seeds d(loss)/d(loss) = 1 and propagates to every parameter leaf,
  // adding into Parameter::grad.
  void backward(Var<T> loss) {
    if (value(loss.id()).size() != 1) {
      throw ShapeError("backward() needs a scalar loss, got " + shape_string(value(loss.id()).shape()));
    }
    grad(loss.id())[0] = T(1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.needs_grad) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param) {
        auto& dst = n.param->grad.storage();
        const auto& src = n.grad.storage();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
    }
  }

  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

  // True when `out` is reachable from the parameter's leaf through recorded
  // ops that carry gradient.
  bool depends_on(Var<T> out, const Parameter<T>& p) const {
    auto it = param_nodes_.find(&p);
    if (it == param_nodes_.end()) return false;
    const std::size_t leaf = it->second;
    std::vector<char> seen(out.id() + 1, 0);
    std::vector<std::size_t> stack{out.id()};
    while (!stack.empty()) {
      const std::size_t id = stack.back();
      stack.pop_back();
      if (id == leaf) return true;
      if (seen[id] || !nodes_[id].needs_grad) continue;
      seen[id] = 1;
      for (std::size_t in : nodes_[id].inputs) stack.push_back(in);
    }
    return false;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    bool has_grad = false;
    bool needs_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
};

}  // namespace spanlm
