/*
 * Copyright 2026 The fewshot-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "fewshot/autodiff/tensor.hpp"

namespace fewshot::ad {

class Graph;

/// Handle to a tensor recorded on a Graph. Cheap to copy; only valid while
/// the owning Graph is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Operations append nodes in execution order, so the
/// node list is already topologically sorted. A tape supports exactly one
/// backward pass; afterwards it is sealed and only values and gradients can
/// be read.
///
/// A Graph and its Vars belong to one thread.
class Graph {
 public:
  /// Receives the gradient of the node's output and scatters it into inputs.
  using BackwardFn = std::function<void(Graph& graph, const Tensor& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that accumulates a gradient.
  Var parameter(Tensor value);
  /// Leaf excluded from differentiation.
  Var constant(Tensor value);

  /// Seeds d(loss)/d(loss) = 1 and runs the tape in reverse. `loss` must be a
  /// one-element tensor with a finite value.
  void backward(Var loss);

  /// Gradient of a node after backward(). Nodes that do not depend on any
  /// parameter report zeros.
  Tensor grad(Var v) const;

  bool requires_grad(Var v) const;
  bool sealed() const noexcept { return sealed_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // -- interface for operation implementations --------------------------

  /// Appends an operation node. `fn` is dropped when no input needs a gradient.
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);
  /// Gradient accumulator for `v`, or nullptr when `v` needs no gradient.
  Tensor* grad_sink(Var v);
  /// Throws when `v` belongs to another graph or the tape is sealed.
  void check_recordable(Var v) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  friend class Var;
  Var push(Node node);

  std::vector<Node> nodes_;
  bool sealed_ = false;
};

}  // namespace fewshot::ad
