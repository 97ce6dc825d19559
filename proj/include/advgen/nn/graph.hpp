// Copyright 2026 The advgen Authors
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

#ifndef ADVGEN_NN_GRAPH_HPP_
#define ADVGEN_NN_GRAPH_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "advgen/nn/tensor.hpp"

namespace advgen::nn {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  /// Grad buffer, zero-allocated on first use.
  Tensor& grad_buffer();
};

/// Handle to a value in a reverse-mode computation graph.
///
/// A graph is only recorded when at least one input requires a gradient, so
/// running a model on constants is a plain forward evaluation.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  const std::vector<int>& shape() const { return node_->value.shape(); }

  /// Same value, cut from the graph.
  Var detach() const;

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
Var leaf(Tensor value);  // requires_grad = true

/// Builds the result node of an op. `backward_fn` is only kept when some
/// parent requires a gradient.
Var make_result(Tensor value, std::vector<Var> parents,
                std::function<void(Node&)> backward_fn);

/// Seeds d(root)/d(root) = 1 and propagates to every reachable leaf.
/// `root` must hold a single element.
void backward(const Var& root);

/// Process-wide instrumentation counters.
struct GraphStats {
  std::uint64_t backward_passes = 0;
  std::uint64_t recorded_nodes = 0;  // op results that captured a backward_fn
};
GraphStats graph_stats();

}  // namespace advgen::nn

#endif  // ADVGEN_NN_GRAPH_HPP_
