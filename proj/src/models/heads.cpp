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

#include "fewshot/heads.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fewshot/autodiff/ops.hpp"
#include "fewshot/error.hpp"

namespace fewshot::heads {

using ad::Tensor;

std::string_view head_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::centroid: return "centroid";
    case HeadKind::ridge: return "ridge";
    case HeadKind::linear_sgd: return "linear_sgd";
    case HeadKind::hinge_sgd: return "hinge_sgd";
  }
  return "?";
}

HeadKind parse_head(std::string_view name) {
  for (HeadKind k : {HeadKind::centroid, HeadKind::ridge, HeadKind::linear_sgd, HeadKind::hinge_sgd})
    if (head_name(k) == name) return k;
  throw InvalidArgument("unknown head '" + std::string(name) + "'");
}

void HeadConfig::validate() const {
  if (!(ridge_lambda > 0.0)) throw InvalidArgument("ridge lambda must be > 0");
  if (sgd_steps == 0 || hinge_steps == 0) throw InvalidArgument("head steps must be >= 1");
  if (!(sgd_lr > 0.0) || !(hinge_lr > 0.0)) throw InvalidArgument("head learning rates must be > 0");
  if (!(hinge_c > 0.0)) throw InvalidArgument("hinge C must be > 0");
}

Tensor LinearHead::scores(const Tensor& features) const {
  Tensor s = ad::matmul(features, weight);
  const std::size_t n = s.cols();
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) += bias[j];
  return s;
}

std::vector<std::size_t> argmax_rows(const Tensor& scores) {
  std::vector<std::size_t> out(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    auto r = scores.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

namespace {

void check_support(const Tensor& features, std::span<const std::size_t> labels, std::size_t ways) {
  if (features.rank() != 2 || features.rows() != labels.size())
    throw ShapeError("support features and labels disagree in length");
  for (std::size_t l : labels)
    if (l >= ways) throw InvalidArgument("support label " + std::to_string(l) + " >= ways");
}

}  // namespace

Tensor fit_centroid_head(const Tensor& features, std::span<const std::size_t> labels, std::size_t ways) {
  check_support(features, labels, ways);
  const std::size_t e = features.cols();
  Tensor centroids({ways, e});
  std::vector<std::size_t> counts(ways, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++counts[labels[i]];
    auto f = features.row(i);
    auto c = centroids.row(labels[i]);
    for (std::size_t j = 0; j < e; ++j) c[j] += f[j];
  }
  for (std::size_t w = 0; w < ways; ++w) {
    if (counts[w] == 0) throw InvalidArgument("way " + std::to_string(w) + " has no support examples");
    for (double& v : centroids.row(w)) v /= static_cast<double>(counts[w]);
  }
  return centroids;
}

std::vector<std::size_t> predict_nearest_centroid(const Tensor& centroids, const Tensor& queries) {
  if (queries.cols() != centroids.cols()) throw ShapeError("query width does not match centroids");
  std::vector<std::size_t> out(queries.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    auto q = queries.row(i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < centroids.rows(); ++w) {
      auto c = centroids.row(w);
      double d = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j) d += (q[j] - c[j]) * (q[j] - c[j]);
      if (d < best) {
        best = d;
        out[i] = w;
      }
    }
  }
  return out;
}

Tensor one_hot(std::span<const std::size_t> labels, std::size_t ways) {
  Tensor y({labels.size(), ways});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= ways) throw InvalidArgument("label " + std::to_string(labels[i]) + " >= ways");
    y(i, labels[i]) = 1.0;
  }
  return y;
}

ad::Var fit_ridge_head(ad::Var features, ad::Var targets, double lambda) {
  if (!(lambda > 0.0)) throw InvalidArgument("ridge lambda must be > 0");
  ad::Graph& g = features.graph();
  const std::size_t e = features.value().cols();
  ad::Var ft = ad::transpose(features);
  Tensor ridge = Tensor::identity(e);
  for (double& v : ridge.data()) v *= lambda;
  ad::Var gram = ad::add(ad::matmul(ft, features), g.constant(ridge));
  return ad::solve_psd(gram, ad::matmul(ft, targets));
}

Tensor fit_ridge_head(const Tensor& features, std::span<const std::size_t> labels, std::size_t ways, double lambda) {
  check_support(features, labels, ways);
  ad::Graph g;
  return fit_ridge_head(g.constant(features), g.constant(one_hot(labels, ways)), lambda).value();
}

LinearHead fit_linear_sgd_head(const Tensor& features, std::span<const std::size_t> labels, std::size_t ways,
                               std::size_t steps, double lr) {
  check_support(features, labels, ways);
  if (steps == 0) throw InvalidArgument("linear head needs steps >= 1");
  const std::size_t b = features.rows(), e = features.cols();
  LinearHead head{Tensor::zeros({e, ways}), Tensor::zeros({ways})};
  const Tensor ft = features.transposed();
  for (std::size_t step = 0; step < steps; ++step) {
    // d/dS of mean CE is (softmax - onehot) / b.
    Tensor s = head.scores(features);
    for (std::size_t i = 0; i < b; ++i) {
      auto r = s.row(i);
      const double m = *std::max_element(r.begin(), r.end());
      double z = 0.0;
      for (double& v : r) z += (v = std::exp(v - m));
      for (double& v : r) v /= z;
      r[labels[i]] -= 1.0;
      for (double& v : r) v /= static_cast<double>(b);
    }
    const Tensor gw = ad::matmul(ft, s);
    for (std::size_t k = 0; k < gw.numel(); ++k) head.weight[k] -= lr * gw[k];
    for (std::size_t j = 0; j < ways; ++j) {
      double gb = 0.0;
      for (std::size_t i = 0; i < b; ++i) gb += s(i, j);
      head.bias[j] -= lr * gb;
    }
  }
  return head;
}

double multiclass_hinge(const Tensor& scores, std::span<const std::size_t> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    auto r = scores.row(i);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < r.size(); ++j)
      if (j != labels[i]) worst = std::max(worst, 1.0 + r[j] - r[labels[i]]);
    total += std::max(0.0, worst);
  }
  return total / static_cast<double>(scores.rows());
}

double hinge_objective(const LinearHead& head, const Tensor& features, std::span<const std::size_t> labels, double c) {
  double norm2 = 0.0;
  for (double v : head.weight.data()) norm2 += v * v;
  return multiclass_hinge(head.scores(features), labels) + norm2 / (2.0 * c);
}

LinearHead fit_hinge_sgd_head(const Tensor& features, std::span<const std::size_t> labels, std::size_t ways,
                              std::size_t steps, double lr, double c) {
  check_support(features, labels, ways);
  if (steps == 0) throw InvalidArgument("hinge head needs steps >= 1");
  if (!(c > 0.0)) throw InvalidArgument("hinge C must be > 0");
  if (ways < 2) throw InvalidArgument("hinge head needs at least 2 ways");
  const std::size_t b = features.rows(), e = features.cols();
  LinearHead head{Tensor::zeros({e, ways}), Tensor::zeros({ways})};
  const Tensor ft = features.transposed();
  for (std::size_t step = 0; step < steps; ++step) {
    const Tensor s = head.scores(features);
    Tensor ds({b, ways});
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t y = labels[i];
      std::size_t rival = y == 0 ? 1 : 0;
      for (std::size_t j = 0; j < ways; ++j)
        if (j != y && s(i, j) > s(i, rival)) rival = j;
      if (1.0 + s(i, rival) - s(i, y) > 0.0) {
        ds(i, rival) += 1.0 / static_cast<double>(b);
        ds(i, y) -= 1.0 / static_cast<double>(b);
      }
    }
    Tensor gw = ad::matmul(ft, ds);
    for (std::size_t k = 0; k < gw.numel(); ++k) gw[k] += head.weight[k] / c;
    for (std::size_t k = 0; k < gw.numel(); ++k) head.weight[k] -= lr * gw[k];
    for (std::size_t j = 0; j < ways; ++j) {
      double gb = 0.0;
      for (std::size_t i = 0; i < b; ++i) gb += ds(i, j);
      head.bias[j] -= lr * gb;
    }
  }
  return head;
}

std::vector<std::size_t> classify(const HeadConfig& config, const Tensor& support_features,
                                  std::span<const std::size_t> support_labels, std::size_t ways,
                                  const Tensor& query_features) {
  switch (config.kind) {
    case HeadKind::centroid:
      return predict_nearest_centroid(fit_centroid_head(support_features, support_labels, ways), query_features);
    case HeadKind::ridge:
      return argmax_rows(
          ad::matmul(query_features, fit_ridge_head(support_features, support_labels, ways, config.ridge_lambda)));
    case HeadKind::linear_sgd:
      return argmax_rows(
          fit_linear_sgd_head(support_features, support_labels, ways, config.sgd_steps, config.sgd_lr)
              .scores(query_features));
    case HeadKind::hinge_sgd:
      return argmax_rows(fit_hinge_sgd_head(support_features, support_labels, ways, config.hinge_steps,
                                            config.hinge_lr, config.hinge_c)
                             .scores(query_features));
  }
  throw InvalidArgument("unknown head kind");
}

models::ParamSet finetune_full(const models::ParamSet& extractor, const Tensor& support,
                               std::span<const std::size_t> labels, std::size_t ways, std::size_t steps, double lr) {
  if (steps == 0) throw InvalidArgument("finetune_full needs steps >= 1");
  models::ParamSet params = extractor.without_head();
  params.append(models::zero_linear(std::string(models::kHeadLayer), params.layers().back().out(), ways));
  models::ParamSet grad;
  for (std::size_t step = 0; step < steps; ++step) {
    models::cross_entropy(params, support, labels, &grad);
    params.axpy(-lr, grad);
  }
  return params;
}

}  // namespace fewshot::heads
