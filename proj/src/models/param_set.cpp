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

#include <algorithm>
#include <cmath>
#include <random>

#include "fewshot/error.hpp"
#include "fewshot/models.hpp"
#include "fewshot/rng.hpp"

namespace fewshot::models {

void ExtractorSpec::validate() const {
  if (input_dim == 0 || embedding == 0) throw InvalidArgument("extractor widths must be >= 1");
  for (std::size_t h : hidden)
    if (h == 0) throw InvalidArgument("extractor widths must be >= 1");
}

ParamSet::ParamSet(std::vector<Layer> layers) : layers_(std::move(layers)) {}

const Layer& ParamSet::layer(std::string_view name) const {
  for (const auto& l : layers_)
    if (l.name == name) return l;
  throw InvalidArgument("no layer named '" + std::string(name) + "'");
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(layers_.begin(), layers_.end(), [&](const Layer& l) { return l.name == name; });
}

void ParamSet::append(Layer layer) {
  if (contains(layer.name)) throw InvalidArgument("duplicate layer '" + layer.name + "'");
  if (layer.bias.rank() != 1 || layer.bias.numel() != layer.out())
    throw ShapeError("bias of layer '" + layer.name + "' does not match its weight");
  layers_.push_back(std::move(layer));
}

std::size_t ParamSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.numel() + l.bias.numel();
  return n;
}

bool ParamSet::same_structure(const ParamSet& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto &a = layers_[i], &b = other.layers_[i];
    if (a.name != b.name || a.weight.shape() != b.weight.shape() || a.bias.shape() != b.bias.shape()) return false;
  }
  return true;
}

bool ParamSet::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(),
                     [](const Layer& l) { return l.weight.all_finite() && l.bias.all_finite(); });
}

ParamSet& ParamSet::axpy(double alpha, const ParamSet& x) {
  if (!same_structure(x)) throw ShapeError("axpy on parameter sets of different structure");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto w = layers_[i].weight.data();
    auto xw = x.layers_[i].weight.data();
    for (std::size_t j = 0; j < w.size(); ++j) w[j] += alpha * xw[j];
    auto b = layers_[i].bias.data();
    auto xb = x.layers_[i].bias.data();
    for (std::size_t j = 0; j < b.size(); ++j) b[j] += alpha * xb[j];
  }
  return *this;
}

ParamSet& ParamSet::scale(double factor) {
  for (auto& l : layers_) {
    for (double& v : l.weight.data()) v *= factor;
    for (double& v : l.bias.data()) v *= factor;
  }
  return *this;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& l : layers_)
    out.layers_.push_back({l.name, ad::Tensor::zeros(l.weight.shape()), ad::Tensor::zeros(l.bias.shape())});
  return out;
}

ParamSet ParamSet::restricted_to(const ParamSet& like) const {
  ParamSet out;
  for (const auto& l : like.layers_) out.layers_.push_back(layer(l.name));
  return out;
}

ParamSet ParamSet::without_head() const {
  ParamSet out;
  for (const auto& l : layers_)
    if (l.name != kHeadLayer) out.layers_.push_back(l);
  return out;
}

ParamSet operator-(const ParamSet& a, const ParamSet& b) {
  ParamSet out = a;
  out.axpy(-1.0, b);
  return out;
}

Layer init_linear(std::string name, std::size_t in, std::size_t out, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / static_cast<double>(in)));
  Layer l{std::move(name), ad::Tensor::zeros({out, in}), ad::Tensor::zeros({out})};
  for (double& v : l.weight.data()) v = normal(rng);
  return l;
}

Layer zero_linear(std::string name, std::size_t in, std::size_t out) {
  return {std::move(name), ad::Tensor::zeros({out, in}), ad::Tensor::zeros({out})};
}

ParamSet init_extractor(const ExtractorSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<std::size_t> widths{spec.input_dim};
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(spec.embedding);
  ParamSet params;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Rng rng = make_rng(seed, {0x6c61796572ULL, i});
    const double stddev = std::sqrt(2.0 / static_cast<double>(widths[i]));
    std::normal_distribution<double> normal(0.0, stddev);
    Layer l = zero_linear("fc" + std::to_string(i), widths[i], widths[i + 1]);
    for (double& v : l.weight.data()) v = normal(rng);
    params.append(std::move(l));
  }
  return params;
}

}  // namespace fewshot::models
