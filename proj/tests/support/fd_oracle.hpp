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

// Central finite-difference oracle used by unit and acceptance tests. It
// only calls the forward pass; gradients from the tape are compared against
// it, never computed by it.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fewshot/autodiff/graph.hpp"
#include "fewshot/autodiff/ops.hpp"

namespace fewshot::testing {

using ad::Graph;
using ad::Tensor;
using ad::Var;

/// Builds a scalar loss from the given input Vars on `g`.
using LossBuilder = std::function<Var(Graph& g, const std::vector<Var>& inputs)>;

inline double evaluate_loss(const LossBuilder& build, const std::vector<Tensor>& inputs) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  return build(g, vars).value().item();
}

inline std::vector<Tensor> tape_gradients(const LossBuilder& build, const std::vector<Tensor>& inputs) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.parameter(t));
  Var loss = build(g, vars);
  g.backward(loss);
  std::vector<Tensor> grads;
  for (const auto& v : vars) grads.push_back(g.grad(v));
  return grads;
}

inline std::vector<Tensor> central_differences(const LossBuilder& build, const std::vector<Tensor>& inputs,
                                               double h = 1e-5) {
  std::vector<Tensor> grads;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Tensor g = Tensor::zeros(inputs[t].shape());
    for (std::size_t i = 0; i < inputs[t].numel(); ++i) {
      std::vector<Tensor> plus = inputs, minus = inputs;
      plus[t][i] += h;
      minus[t][i] -= h;
      g[i] = (evaluate_loss(build, plus) - evaluate_loss(build, minus)) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

/// Largest norm-wise relative error ||fd - tape|| / max(||fd||, ||tape||)
/// over the inputs selected by `which` (all when empty).
inline double gradient_relative_error(const LossBuilder& build, const std::vector<Tensor>& inputs,
                                      std::vector<std::size_t> which = {}, double h = 1e-5) {
  const auto tape = tape_gradients(build, inputs);
  const auto fd = central_differences(build, inputs, h);
  if (which.empty())
    for (std::size_t i = 0; i < inputs.size(); ++i) which.push_back(i);
  double worst = 0.0;
  for (std::size_t t : which) {
    double diff = 0.0, nf = 0.0, na = 0.0;
    for (std::size_t i = 0; i < fd[t].numel(); ++i) {
      diff += (fd[t][i] - tape[t][i]) * (fd[t][i] - tape[t][i]);
      nf += fd[t][i] * fd[t][i];
      na += tape[t][i] * tape[t][i];
    }
    const double denom = std::max(std::sqrt(std::max(nf, na)), 1e-300);
    worst = std::max(worst, std::sqrt(diff) / denom);
  }
  return worst;
}

inline Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : t.data()) v = n(rng);
  return t;
}

/// Random symmetric positive definite matrix M M^T + n I.
inline Tensor random_spd(std::size_t n, std::mt19937_64& rng) {
  Tensor m = random_tensor({n, n}, rng);
  Tensor a = ad::matmul(m, m.transposed());
  for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  return a;
}

}  // namespace fewshot::testing
