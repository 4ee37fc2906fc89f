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
#include <optional>
#include <span>
#include <vector>

#include "fewshot/autodiff/graph.hpp"
#include "fewshot/autodiff/tensor.hpp"
#include "fewshot/models.hpp"

namespace fewshot::metrics {

/// Within-class to between-class variance ratio of the rows of `features`
/// grouped by `class_ids`:
///
///   (C / N) * sum_ij ||phi_ij - mu_i||^2 / sum_i ||mu_i - mu||^2
///
/// with mu the mean of all rows. Unbalanced classes use the harmonic mean of
/// the per-class counts for N.
double variance_ratio(const ad::Tensor& features, std::span<const std::size_t> class_ids);

/// Same quantity recorded on the graph, for use as a training penalty.
ad::Var r_fc_loss(ad::Var features, std::span<const std::size_t> class_ids);

/// ||(fx1 - fy1) - (fx2 - fy2)|| / (||fx1 - fy1|| + ||fx2 - fy2||), in [0, 1].
double r_hv(std::span<const double> fx1, std::span<const double> fx2, std::span<const double> fy1,
            std::span<const double> fy2);

/// Mean r_hv over consecutive class pairs. Classes are taken in order of
/// first appearance and the first two rows of each class are x1/x2 (or
/// y1/y2), so class c is paired with class c + 1.
double r_hv_mean(const ad::Tensor& features, std::span<const std::size_t> class_ids);
ad::Var r_hv_loss(ad::Var features, std::span<const std::size_t> class_ids);

/// Linear centered kernel alignment between two representations of the same rows.
double linear_cka(const ad::Tensor& x, const ad::Tensor& y);

struct LdaProjection {
  ad::Tensor coordinates;  // [rows x k], centered on the global mean
  ad::Tensor basis;        // [e x k], orthonormal columns
  std::vector<double> eigenvalues;
};

/// Top-k discriminant directions of S_B against S_W + eps I with
/// eps = 1e-6 trace(S_W) / e.
LdaProjection lda_project(const ad::Tensor& features, std::span<const std::size_t> class_ids,
                          std::size_t out_dims = 2);

/// Euclidean distance after normalising every weight row and every bias
/// vector to unit length (zero rows stay zero).
double filter_norm_distance(const models::ParamSet& a, const models::ParamSet& b);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;

  std::size_t bins() const { return counts.size(); }
  std::size_t total() const;
  double bin_lo(std::size_t i) const;
  double bin_hi(std::size_t i) const;
};

/// Equal-width bins over [lo, hi]; the range defaults to the data range and
/// values equal to hi land in the last bin. Values outside an explicit range
/// are clamped into the end bins so counts always sum to values.size().
Histogram make_histogram(std::span<const double> values, std::size_t bins,
                         std::optional<std::pair<double, double>> range = std::nullopt);

}  // namespace fewshot::metrics
