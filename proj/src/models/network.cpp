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

#include "fewshot/autodiff/ops.hpp"
#include "fewshot/error.hpp"
#include "fewshot/models.hpp"

namespace fewshot::models {

BoundParams bind(ad::Graph& graph, const ParamSet& params, bool trainable) {
  BoundParams b;
  for (const auto& l : params.layers()) {
    b.weights.push_back(trainable ? graph.parameter(l.weight) : graph.constant(l.weight));
    b.biases.push_back(trainable ? graph.parameter(l.bias) : graph.constant(l.bias));
  }
  return b;
}

ParamSet gradients(const ad::Graph& graph, const BoundParams& bound, const ParamSet& like) {
  ParamSet g = like;
  for (std::size_t i = 0; i < g.layers().size(); ++i) {
    g.layers()[i].weight = graph.grad(bound.weights[i]);
    g.layers()[i].bias = graph.grad(bound.biases[i]);
  }
  return g;
}

ad::Var affine(ad::Var x, ad::Var weight, ad::Var bias) {
  return ad::add(ad::matmul(x, ad::transpose(weight)), bias);
}

ad::Var forward_features(const ParamSet& params, const BoundParams& bound, ad::Var x) {
  const auto& layers = params.layers();
  std::size_t last = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name != kHeadLayer) last = i;
  if (last == layers.size()) throw InvalidArgument("parameter set has no extractor layers");
  if (x.value().rank() != 2 || x.value().cols() != layers.front().in())
    throw ShapeError("input width " + ad::shape_string(x.value().shape()) + " does not match extractor input " +
                     std::to_string(layers.front().in()));
  ad::Var h = x;
  for (std::size_t i = 0; i <= last; ++i) {
    if (layers[i].name == kHeadLayer) continue;
    h = affine(h, bound.weights[i], bound.biases[i]);
    if (i != last) h = ad::relu(h);
  }
  return h;
}

ad::Var forward_logits(const ParamSet& params, const BoundParams& bound, ad::Var x) {
  ad::Var features = forward_features(params, bound, x);
  const auto& layers = params.layers();
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == kHeadLayer) return affine(features, bound.weights[i], bound.biases[i]);
  throw InvalidArgument("parameter set has no head layer");
}

ad::Tensor extract(const ParamSet& params, const ad::Tensor& x) {
  ad::Graph g;
  const BoundParams bound = bind(g, params, false);
  return forward_features(params, bound, g.constant(x)).value();
}

ad::Tensor logits(const ParamSet& params, const ad::Tensor& x) {
  ad::Graph g;
  const BoundParams bound = bind(g, params, false);
  return forward_logits(params, bound, g.constant(x)).value();
}

double cross_entropy(const ParamSet& params, const ad::Tensor& x, std::span<const std::size_t> labels,
                     ParamSet* grad) {
  ad::Graph g;
  const BoundParams bound = bind(g, params, grad != nullptr);
  ad::Var loss = ad::softmax_cross_entropy(forward_logits(params, bound, g.constant(x)), labels);
  const double value = loss.value().item();
  if (grad) {
    g.backward(loss);
    *grad = gradients(g, bound, params);
  }
  return value;
}

}  // namespace fewshot::models
