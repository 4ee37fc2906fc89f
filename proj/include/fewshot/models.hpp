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
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/autodiff/graph.hpp"
#include "fewshot/autodiff/tensor.hpp"

namespace fewshot::models {

/// Name reserved for an episode-level linear head appended to an extractor.
inline constexpr std::string_view kHeadLayer = "head";

/// MLP feature extractor: input -> hidden... -> embedding, ReLU between
/// layers and none after the last.
struct ExtractorSpec {
  std::size_t input_dim = 16;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t embedding = 32;

  void validate() const;
  friend bool operator==(const ExtractorSpec&, const ExtractorSpec&) = default;
};

/// Affine layer; each row of `weight` [out x in] is one filter.
struct Layer {
  std::string name;
  ad::Tensor weight;
  ad::Tensor bias;

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Ordered, named parameter collection. Value type: copies are deep, so
/// adapted copies never alias the original.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::vector<Layer> layers);

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  const Layer& layer(std::string_view name) const;
  bool contains(std::string_view name) const;
  void append(Layer layer);

  /// Total number of scalars.
  std::size_t parameter_count() const;
  bool same_structure(const ParamSet& other) const;
  bool all_finite() const;

  /// this += alpha * x; structures must match.
  ParamSet& axpy(double alpha, const ParamSet& x);
  ParamSet& scale(double factor);
  ParamSet zeros_like() const;
  /// Layers of *this whose names appear in `like`, in `like`'s order.
  ParamSet restricted_to(const ParamSet& like) const;
  /// Layers other than the episode head.
  ParamSet without_head() const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<Layer> layers_;
};

ParamSet operator-(const ParamSet& a, const ParamSet& b);

/// He-normal weights, zero biases. Layers are named fc0, fc1, ...
ParamSet init_extractor(const ExtractorSpec& spec, std::uint64_t seed);
/// Linear layer with N(0, 1/in) weights and zero bias.
Layer init_linear(std::string name, std::size_t in, std::size_t out, std::uint64_t seed);
Layer zero_linear(std::string name, std::size_t in, std::size_t out);

/// ParamSet leaves on a graph, one weight/bias Var pair per layer.
struct BoundParams {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

BoundParams bind(ad::Graph& graph, const ParamSet& params, bool trainable);
/// Collects d(loss)/d(params) after backward().
ParamSet gradients(const ad::Graph& graph, const BoundParams& bound, const ParamSet& like);

/// x W^T + b on the graph.
ad::Var affine(ad::Var x, ad::Var weight, ad::Var bias);

/// Runs every non-head layer of `params` over `x` [b x d].
ad::Var forward_features(const ParamSet& params, const BoundParams& bound, ad::Var x);
/// Features followed by the head layer, giving logits.
ad::Var forward_logits(const ParamSet& params, const BoundParams& bound, ad::Var x);

/// Off-graph feature extraction for a batch of rows.
ad::Tensor extract(const ParamSet& params, const ad::Tensor& x);
ad::Tensor logits(const ParamSet& params, const ad::Tensor& x);

/// Support cross-entropy of extractor+head parameters; fills `grad` (same
/// structure as `params`) when non-null.
double cross_entropy(const ParamSet& params, const ad::Tensor& x, std::span<const std::size_t> labels,
                     ParamSet* grad);

}  // namespace fewshot::models
