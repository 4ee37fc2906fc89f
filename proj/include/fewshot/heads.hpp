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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/autodiff/graph.hpp"
#include "fewshot/autodiff/tensor.hpp"
#include "fewshot/models.hpp"

/// Episode-level classifiers fit on frozen support features, plus full
/// fine-tuning of extractor and a fresh head.
///
/// Every prediction rule breaks ties toward the lowest way index.
namespace fewshot::heads {

enum class HeadKind { centroid, ridge, linear_sgd, hinge_sgd };

std::string_view head_name(HeadKind kind);
HeadKind parse_head(std::string_view name);

struct HeadConfig {
  HeadKind kind = HeadKind::centroid;
  double ridge_lambda = 1.0;
  std::size_t sgd_steps = 100;
  double sgd_lr = 0.1;
  std::size_t hinge_steps = 100;
  double hinge_lr = 0.1;
  double hinge_c = 1.0;

  void validate() const;
};

/// Scores [b x n] plus bias, scores = features W + b.
struct LinearHead {
  ad::Tensor weight;  // [e x n]
  ad::Tensor bias;    // [n]

  ad::Tensor scores(const ad::Tensor& features) const;
};

/// argmax per row, lowest index on ties.
std::vector<std::size_t> argmax_rows(const ad::Tensor& scores);

/// Per-way mean of support features, [n x e].
ad::Tensor fit_centroid_head(const ad::Tensor& features, std::span<const std::size_t> labels, std::size_t ways);
std::vector<std::size_t> predict_nearest_centroid(const ad::Tensor& centroids, const ad::Tensor& queries);

ad::Tensor one_hot(std::span<const std::size_t> labels, std::size_t ways);

/// W = (F^T F + lambda I)^{-1} F^T Y, [e x n].
ad::Tensor fit_ridge_head(const ad::Tensor& features, std::span<const std::size_t> labels, std::size_t ways,
                          double lambda);
/// Differentiable form; `targets` is the [b x n] one-hot matrix.
ad::Var fit_ridge_head(ad::Var features, ad::Var targets, double lambda);

/// Full-batch gradient descent on softmax cross-entropy from zero.
LinearHead fit_linear_sgd_head(const ad::Tensor& features, std::span<const std::size_t> labels, std::size_t ways,
                               std::size_t steps, double lr);

/// Mean Crammer-Singer hinge loss max_{w != y}(1 + s_w - s_y)_+.
double multiclass_hinge(const ad::Tensor& scores, std::span<const std::size_t> labels);
/// Hinge loss plus ||W||^2 / (2C).
double hinge_objective(const LinearHead& head, const ad::Tensor& features, std::span<const std::size_t> labels,
                       double c);
/// Subgradient descent on hinge_objective from zero.
LinearHead fit_hinge_sgd_head(const ad::Tensor& features, std::span<const std::size_t> labels, std::size_t ways,
                              std::size_t steps, double lr, double c);

/// Fits the configured head on support features and labels the queries.
std::vector<std::size_t> classify(const HeadConfig& config, const ad::Tensor& support_features,
                                  std::span<const std::size_t> support_labels, std::size_t ways,
                                  const ad::Tensor& query_features);

/// Copies `extractor`, appends a zero-initialised `ways`-output head and runs
/// `steps` full-batch SGD steps on the support cross-entropy, updating every
/// layer. The input is not modified.
models::ParamSet finetune_full(const models::ParamSet& extractor, const ad::Tensor& support,
                               std::span<const std::size_t> labels, std::size_t ways, std::size_t steps, double lr);

}  // namespace fewshot::heads
