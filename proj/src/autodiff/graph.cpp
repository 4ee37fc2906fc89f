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

#include "fewshot/autodiff/graph.hpp"

#include <string>

#include "fewshot/error.hpp"

namespace fewshot::ad {

const Tensor& Var::value() const {
  if (!graph_) throw GraphError("value() on an unbound Var");
  return graph_->nodes_.at(id_).value;
}

Var Graph::push(Node node) {
  if (sealed_) throw GraphError("graph already ran backward; record a new graph");
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(Tensor value) {
  if (!value.all_finite()) throw NumericalError("non-finite value entering graph as parameter");
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::constant(Tensor value) {
  if (!value.all_finite()) throw NumericalError("non-finite value entering graph as constant");
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

void Graph::check_recordable(Var v) const {
  if (&v.graph() != this) throw GraphError("operand belongs to a different graph");
  if (sealed_) throw GraphError("graph already ran backward; record a new graph");
}

Var Graph::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  bool needs = false;
  for (const Var& in : inputs) {
    check_recordable(in);
    needs = needs || nodes_[in.id()].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor* Graph::grad_sink(Var v) {
  Node& n = nodes_.at(v.id());
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value.shape());
    n.has_grad = true;
  }
  return &n.grad;
}

void Graph::backward(Var loss) {
  if (&loss.graph() != this) throw GraphError("loss belongs to a different graph");
  if (sealed_) throw GraphError("backward() called twice on one graph");
  const Tensor& lv = nodes_.at(loss.id()).value;
  if (lv.numel() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_string(lv.shape()));
  if (!lv.all_finite()) throw NumericalError("non-finite loss value");
  sealed_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  Tensor* seed = grad_sink(loss);
  seed->data()[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    // The closure may grow other nodes' gradients but never this node's.
    n.backward(*this, n.grad);
  }
  for (Node& n : nodes_) n.backward = nullptr;
}

Tensor Graph::grad(Var v) const {
  if (&v.graph() != this) throw GraphError("Var belongs to a different graph");
  const Node& n = nodes_.at(v.id());
  if (n.has_grad) return n.grad;
  return Tensor::zeros(n.value.shape());
}

bool Graph::requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }

}  // namespace fewshot::ad
