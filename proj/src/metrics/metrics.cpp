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

#include "fewshot/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "fewshot/autodiff/ops.hpp"
#include "fewshot/error.hpp"

namespace fewshot::metrics {

using ad::Tensor;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

// Dense class indices in order of first appearance.
struct Grouping {
  std::vector<std::size_t> index;              // per row
  std::vector<std::vector<std::size_t>> rows;  // per class
};

Grouping group(std::span<const std::size_t> class_ids, std::size_t rows) {
  if (class_ids.size() != rows) throw ShapeError("class ids and feature rows disagree");
  Grouping g;
  std::map<std::size_t, std::size_t> dense;
  for (std::size_t r = 0; r < rows; ++r) {
    auto [it, fresh] = dense.emplace(class_ids[r], g.rows.size());
    if (fresh) g.rows.emplace_back();
    g.index.push_back(it->second);
    g.rows[it->second].push_back(r);
  }
  return g;
}

double harmonic_count(const Grouping& g) {
  double inv = 0.0;
  for (const auto& r : g.rows) inv += 1.0 / static_cast<double>(r.size());
  return static_cast<double>(g.rows.size()) / inv;
}

Grouping checked_grouping(std::span<const std::size_t> class_ids, std::size_t rows) {
  Grouping g = group(class_ids, rows);
  if (g.rows.size() < 2) throw DegenerateInputError("variance ratio needs at least 2 classes");
  for (const auto& r : g.rows)
    if (r.size() < 2) throw DegenerateInputError("variance ratio needs at least 2 examples per class");
  return g;
}

Eigen::Map<const Matrix> view(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("expected a matrix, got " + ad::shape_string(t.shape()));
  return {t.values().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

}  // namespace

double variance_ratio(const Tensor& features, std::span<const std::size_t> class_ids) {
  if (features.rank() != 2) throw ShapeError("variance_ratio expects [rows x dims]");
  const Grouping g = checked_grouping(class_ids, features.rows());
  const std::size_t e = features.cols(), c = g.rows.size();
  std::vector<double> mu(e, 0.0);
  for (std::size_t r = 0; r < features.rows(); ++r)
    for (std::size_t j = 0; j < e; ++j) mu[j] += features(r, j);
  for (double& v : mu) v /= static_cast<double>(features.rows());

  double within = 0.0, between = 0.0;
  for (const auto& rows : g.rows) {
    std::vector<double> m(e, 0.0);
    for (std::size_t r : rows)
      for (std::size_t j = 0; j < e; ++j) m[j] += features(r, j);
    for (double& v : m) v /= static_cast<double>(rows.size());
    for (std::size_t r : rows)
      for (std::size_t j = 0; j < e; ++j) within += (features(r, j) - m[j]) * (features(r, j) - m[j]);
    for (std::size_t j = 0; j < e; ++j) between += (m[j] - mu[j]) * (m[j] - mu[j]);
  }
  if (!(between > 0.0)) throw DegenerateInputError("class means coincide; between-class variance is zero");
  return static_cast<double>(c) / harmonic_count(g) * within / between;
}

ad::Var r_fc_loss(ad::Var features, std::span<const std::size_t> class_ids) {
  const Tensor& f = features.value();
  if (f.rank() != 2) throw ShapeError("r_fc_loss expects [rows x dims]");
  const Grouping g = checked_grouping(class_ids, f.rows());
  const std::size_t b = f.rows(), c = g.rows.size();
  ad::Graph& graph = features.graph();

  Tensor averaging({c, b}), assignment({b, c});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t r : g.rows[k]) averaging(k, r) = 1.0 / static_cast<double>(g.rows[k].size());
  for (std::size_t r = 0; r < b; ++r) assignment(r, g.index[r]) = 1.0;

  ad::Var means = ad::matmul(graph.constant(averaging), features);
  ad::Var centered = ad::sub(features, ad::matmul(graph.constant(assignment), means));
  ad::Var within = ad::sum(ad::square(centered));
  ad::Var global = ad::mean(features, 0);
  ad::Var between = ad::sum(ad::square(ad::sub(means, global)));
  if (!(between.value().item() > 0.0))
    throw DegenerateInputError("class means coincide; between-class variance is zero");
  return ad::scale(ad::div(within, between), static_cast<double>(c) / harmonic_count(g));
}

double r_hv(std::span<const double> fx1, std::span<const double> fx2, std::span<const double> fy1,
            std::span<const double> fy2) {
  const std::size_t e = fx1.size();
  if (fx2.size() != e || fy1.size() != e || fy2.size() != e) throw ShapeError("r_hv inputs differ in length");
  double num = 0.0, a = 0.0, b = 0.0;
  for (std::size_t j = 0; j < e; ++j) {
    const double d1 = fx1[j] - fy1[j], d2 = fx2[j] - fy2[j];
    num += (d1 - d2) * (d1 - d2);
    a += d1 * d1;
    b += d2 * d2;
  }
  const double den = std::sqrt(a) + std::sqrt(b);
  if (!(den > 0.0)) throw DegenerateInputError("r_hv: both class differences are zero");
  return std::sqrt(num) / den;
}

namespace {

struct HvPairs {
  Tensor first;   // rows x1 - y1
  Tensor second;  // rows x2 - y2
};

HvPairs hv_selectors(std::span<const std::size_t> class_ids, std::size_t rows) {
  const Grouping g = group(class_ids, rows);
  if (g.rows.size() < 2) throw DegenerateInputError("r_hv needs at least 2 classes");
  for (const auto& r : g.rows)
    if (r.size() < 2) throw DegenerateInputError("r_hv needs at least 2 examples per class");
  const std::size_t pairs = g.rows.size() - 1;
  HvPairs s{Tensor({pairs, rows}), Tensor({pairs, rows})};
  for (std::size_t p = 0; p < pairs; ++p) {
    s.first(p, g.rows[p][0]) += 1.0;
    s.first(p, g.rows[p + 1][0]) -= 1.0;
    s.second(p, g.rows[p][1]) += 1.0;
    s.second(p, g.rows[p + 1][1]) -= 1.0;
  }
  return s;
}

}  // namespace

double r_hv_mean(const Tensor& features, std::span<const std::size_t> class_ids) {
  const HvPairs s = hv_selectors(class_ids, features.rows());
  const Tensor d1 = ad::matmul(s.first, features), d2 = ad::matmul(s.second, features);
  const Tensor zero = Tensor::zeros({features.cols()});
  double total = 0.0;
  for (std::size_t p = 0; p < d1.rows(); ++p) total += r_hv(d1.row(p), d2.row(p), zero.data(), zero.data());
  return total / static_cast<double>(d1.rows());
}

ad::Var r_hv_loss(ad::Var features, std::span<const std::size_t> class_ids) {
  const HvPairs s = hv_selectors(class_ids, features.value().rows());
  ad::Graph& g = features.graph();
  ad::Var d1 = ad::matmul(g.constant(s.first), features);
  ad::Var d2 = ad::matmul(g.constant(s.second), features);
  auto row_norm = [](ad::Var v) { return ad::sqrt(ad::sum(ad::square(v), 1)); };
  ad::Var den = ad::add(row_norm(d1), row_norm(d2));
  for (double v : den.value().values())
    if (!(v > 0.0)) throw DegenerateInputError("r_hv: both class differences are zero");
  return ad::mean(ad::div(row_norm(ad::sub(d1, d2)), den));
}

double linear_cka(const Tensor& x, const Tensor& y) {
  if (x.rank() != 2 || y.rank() != 2 || x.rows() != y.rows()) throw ShapeError("linear_cka needs equal row counts");
  const Matrix xc = view(x).rowwise() - view(x).colwise().mean();
  const Matrix yc = view(y).rowwise() - view(y).colwise().mean();
  if (!(xc.norm() > 0.0) || !(yc.norm() > 0.0)) throw DegenerateInputError("linear_cka: constant representation");
  const double cross = (yc.transpose() * xc).squaredNorm();
  return cross / ((xc.transpose() * xc).norm() * (yc.transpose() * yc).norm());
}

LdaProjection lda_project(const Tensor& features, std::span<const std::size_t> class_ids, std::size_t out_dims) {
  if (out_dims == 0) throw InvalidArgument("lda_project needs out_dims >= 1");
  const Grouping g = group(class_ids, features.rows());
  if (g.rows.size() < out_dims + 1)
    throw InvalidArgument("lda_project needs at least " + std::to_string(out_dims + 1) + " classes");
  const auto f = view(features);
  const Eigen::Index e = f.cols();
  if (static_cast<Eigen::Index>(out_dims) > e) throw InvalidArgument("out_dims exceeds feature dimension");
  const Eigen::RowVectorXd mu = f.colwise().mean();
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(e, e), sb = Eigen::MatrixXd::Zero(e, e);
  for (const auto& rows : g.rows) {
    Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(e);
    for (std::size_t r : rows) m += f.row(static_cast<Eigen::Index>(r));
    m /= static_cast<double>(rows.size());
    for (std::size_t r : rows) {
      const Eigen::RowVectorXd d = f.row(static_cast<Eigen::Index>(r)) - m;
      sw.noalias() += d.transpose() * d;
    }
    const Eigen::RowVectorXd d = m - mu;
    sb.noalias() += static_cast<double>(rows.size()) * d.transpose() * d;
  }
  double eps = 1e-6 * sw.trace() / static_cast<double>(e);
  if (!(eps > 0.0)) eps = 1e-12;
  sw.diagonal().array() += eps;

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(sb, sw);
  if (solver.info() != Eigen::Success) throw NumericalError("lda_project: generalized eigensolver failed");
  // Eigenvalues come back ascending.
  const Eigen::Index k = static_cast<Eigen::Index>(out_dims);
  Eigen::MatrixXd top(e, k);
  LdaProjection out;
  for (Eigen::Index i = 0; i < k; ++i) {
    top.col(i) = solver.eigenvectors().col(e - 1 - i);
    out.eigenvalues.push_back(solver.eigenvalues()(e - 1 - i));
  }
  // Gram-Schmidt keeps the leading direction fixed.
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) top.col(i) -= top.col(j).dot(top.col(i)) * top.col(j);
    const double n = top.col(i).norm();
    if (!(n > 1e-12)) throw DegenerateInputError("lda_project: discriminant directions are dependent");
    top.col(i) /= n;
  }
  out.basis = Tensor({static_cast<std::size_t>(e), out_dims});
  for (Eigen::Index i = 0; i < e; ++i)
    for (Eigen::Index j = 0; j < k; ++j) out.basis(i, j) = top(i, j);
  const Matrix coords = (f.rowwise() - mu) * top;
  out.coordinates = Tensor({features.rows(), out_dims}, std::vector<double>(coords.data(), coords.data() + coords.size()));
  return out;
}

namespace {

void add_normalized_difference(std::span<const double> a, std::span<const double> b, double& total) {
  double na = 0.0, nb = 0.0;
  for (double v : a) na += v * v;
  for (double v : b) nb += v * v;
  na = na > 0.0 ? 1.0 / std::sqrt(na) : 0.0;
  nb = nb > 0.0 ? 1.0 / std::sqrt(nb) : 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] * na - b[j] * nb;
    total += d * d;
  }
}

}  // namespace

double filter_norm_distance(const models::ParamSet& a, const models::ParamSet& b) {
  if (!a.same_structure(b)) throw ShapeError("filter_norm_distance: parameter sets differ in structure");
  double total = 0.0;
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    const auto& la = a.layers()[l];
    const auto& lb = b.layers()[l];
    for (std::size_t r = 0; r < la.out(); ++r) add_normalized_difference(la.weight.row(r), lb.weight.row(r), total);
    add_normalized_difference(la.bias.data(), lb.bias.data(), total);
  }
  return std::sqrt(total);
}

std::size_t Histogram::total() const {
  std::size_t n = 0;
  for (std::size_t c : counts) n += c;
  return n;
}

double Histogram::bin_lo(std::size_t i) const { return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins()); }
double Histogram::bin_hi(std::size_t i) const { return i + 1 == bins() ? hi : bin_lo(i + 1); }

Histogram make_histogram(std::span<const double> values, std::size_t bins,
                         std::optional<std::pair<double, double>> range) {
  if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
  for (double v : values)
    if (!std::isfinite(v)) throw NumericalError("histogram value is not finite");
  Histogram h;
  if (range) {
    h.lo = range->first;
    h.hi = range->second;
  } else if (!values.empty()) {
    auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    h.lo = *mn;
    h.hi = *mx;
  }
  if (!(h.hi > h.lo)) h.hi = h.lo + 1.0;
  h.counts.assign(bins, 0);
  for (double v : values) {
    const double t = (v - h.lo) / (h.hi - h.lo) * static_cast<double>(bins);
    const auto i = static_cast<std::ptrdiff_t>(std::floor(t));
    ++h.counts[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(bins) - 1))];
  }
  return h;
}

}  // namespace fewshot::metrics
