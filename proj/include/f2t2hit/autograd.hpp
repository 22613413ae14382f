// Copyright 2026 The F2T2-HiT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal reverse-mode differentiation over Tensor values.
//
// Every differentiable op produces a Var whose node remembers its inputs and
// a closure that pushes the node's gradient back into them. backward() walks
// the recorded graph in reverse topological order. Nodes are only recorded
// while gradient mode is on and at least one input requires a gradient, so
// inference runs allocate nothing beyond the forward values.

#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <vector>

#include "f2t2hit/tensor.hpp"

namespace f2t2hit {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily on first accumulation
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-initialized on first use.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  /// Direct access for optimizers and initializers; never call while a graph
  /// that reads this value is still awaiting backward().
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int64_t numel() const { return node_->value.numel(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  /// Accumulated gradient; a zero tensor if nothing has flowed back yet.
  Tensor grad() const;
  void zero_grad();

  const NodePtr& node() const noexcept { return node_; }

 private:
  NodePtr node_;
};

/// Creates a trainable leaf.
Var parameter(Tensor value);

/// Records an op output. `fn` runs during backward with the output node; it
/// reads `self.grad` and accumulates into `self.inputs[i]->grad_buffer()` for
/// inputs that require gradients.
Var record(Tensor value, std::initializer_list<Var> inputs, std::function<void(Node&)> fn);
Var record(Tensor value, const std::vector<Var>& inputs, std::function<void(Node&)> fn);

/// Back-propagates from `root`. A scalar root is seeded with 1, otherwise
/// `seed` (same shape as root) must be given.
void backward(const Var& root, std::optional<Tensor> seed = std::nullopt);

bool grad_mode_enabled() noexcept;

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace f2t2hit
