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

#include "f2t2hit/autograd.hpp"

#include <unordered_set>
#include <utility>

#include "f2t2hit/errors.hpp"

namespace f2t2hit {

namespace {
thread_local bool g_grad_mode = true;
}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty() && value.numel() > 0) grad = Tensor(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
  if (!node_) return {};
  if (node_->grad.empty()) return Tensor(node_->value.shape());
  return node_->grad;
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

Var parameter(Tensor value) { return Var(std::move(value), true); }

Var record(Tensor value, const std::vector<Var>& inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (!g_grad_mode) return Var(std::move(node));
  bool any = false;
  for (const Var& in : inputs) any = any || in.requires_grad();
  if (!any) return Var(std::move(node));
  node->requires_grad = true;
  node->inputs.reserve(inputs.size());
  for (const Var& in : inputs) node->inputs.push_back(in.node());
  node->backward = std::move(fn);
  return Var(std::move(node));
}

Var record(Tensor value, std::initializer_list<Var> inputs, std::function<void(Node&)> fn) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

void backward(const Var& root, std::optional<Tensor> seed) {
  if (!root.defined()) throw ArgumentError("backward on an undefined variable");
  Node* top = root.node().get();
  if (seed) {
    if (seed->shape() != top->value.shape()) {
      throw ShapeError("backward seed " + shape_string(seed->shape()) + " does not match " +
                       shape_string(top->value.shape()));
    }
  } else if (top->value.numel() != 1) {
    throw ShapeError("backward without seed needs a scalar root, got " +
                     shape_string(top->value.shape()));
  }
  if (!top->requires_grad) return;

  // Iterative post-order DFS; `order` ends up with inputs before consumers.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack{{top, 0}};
  visited.insert(top);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  Tensor& g = top->grad_buffer();
  if (seed) {
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += (*seed)[i];
  } else {
    g[0] += 1.0;
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

bool grad_mode_enabled() noexcept { return g_grad_mode; }

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

}  // namespace f2t2hit
