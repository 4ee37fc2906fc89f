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

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fewshot/error.hpp"

namespace fewshot::ad {
namespace {

bool tail_matches(const Shape& small, const Shape& large) {
  if (small.size() + 1 == large.size())
    return std::equal(small.begin(), small.end(), large.begin() + 1);
  if (small.size() == large.size() && !small.empty() && small[0] == 1)
    return std::equal(small.begin() + 1, small.end(), large.begin() + 1);
  return false;
}

// Output shape of a broadcast binary op. A broadcast operand is tiled
// contiguously, so its element for output index i is at i % numel.
Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.numel() == 1 && a.numel() >= 1) return a.shape();
  if (a.numel() == 1) return b.shape();
  if (tail_matches(b.shape(), a.shape())) return a.shape();
  if (tail_matches(a.shape(), b.shape())) return b.shape();
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, const Shape& out_shape, F f) {
  Tensor out(out_shape);
  const std::size_t na = a.numel(), nb = b.numel(), n = out.numel();
  auto pa = a.data(), pb = b.data();
  auto po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i % na], pb[i % nb]);
  return out;
}

// Adds `contrib(i)` for every output index i into a possibly broadcast sink.
template <class F>
void scatter(Tensor* sink, std::size_t n, F contrib) {
  if (!sink) return;
  auto ps = sink->data();
  const std::size_t ns = ps.size();
  for (std::size_t i = 0; i < n; ++i) ps[i % ns] += contrib(i);
}

template <class D>
Var unary(Var a, Tensor value, D derivative) {
  Graph& g = a.graph();
  return g.record(std::move(value), {a}, [a, derivative](Graph& g, const Tensor& og) {
    Tensor* sink = g.grad_sink(a);
    if (!sink) return;
    auto x = a.value().data();
    auto gs = og.data();
    auto ps = sink->data();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i] += gs[i] * derivative(x[i]);
  });
}

struct ReduceDims {
  std::size_t outer, len, inner;
};

ReduceDims reduce_dims(const Shape& s, std::size_t axis) {
  if (axis >= s.size())
    throw ShapeError("reduction axis " + std::to_string(axis) + " invalid for shape " + shape_string(s));
  ReduceDims r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Var reduce_axis(Var a, std::size_t axis, double weight) {
  const Tensor& x = a.value();
  const ReduceDims rd = reduce_dims(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape);
  auto px = x.data();
  auto po = out.data();
  for (std::size_t o = 0; o < rd.outer; ++o)
    for (std::size_t l = 0; l < rd.len; ++l)
      for (std::size_t i = 0; i < rd.inner; ++i) po[o * rd.inner + i] += px[(o * rd.len + l) * rd.inner + i];
  if (weight != 1.0)
    for (double& v : po) v *= weight;
  return a.graph().record(std::move(out), {a}, [a, rd, weight](Graph& g, const Tensor& og) {
    Tensor* sink = g.grad_sink(a);
    if (!sink) return;
    auto ps = sink->data();
    auto gs = og.data();
    for (std::size_t o = 0; o < rd.outer; ++o)
      for (std::size_t l = 0; l < rd.len; ++l)
        for (std::size_t i = 0; i < rd.inner; ++i) ps[(o * rd.len + l) * rd.inner + i] += weight * gs[o * rd.inner + i];
  });
}

Var reduce_all(Var a, double weight) {
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.data()) s += v;
  return a.graph().record(Tensor::scalar(s * weight), {a}, [a, weight](Graph& g, const Tensor& og) {
    Tensor* sink = g.grad_sink(a);
    if (!sink) return;
    const double gv = og.item() * weight;
    for (double& v : sink->data()) v += gv;
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = a.graph();
  g.check_recordable(b);
  Tensor c = matmul(a.value(), b.value());
  return g.record(std::move(c), {a, b}, [a, b](Graph& g, const Tensor& og) {
    if (Tensor* sa = g.grad_sink(a)) {
      Tensor da = matmul(og, b.value().transposed());
      auto ps = sa->data();
      auto pd = da.data();
      for (std::size_t i = 0; i < ps.size(); ++i) ps[i] += pd[i];
    }
    if (Tensor* sb = g.grad_sink(b)) {
      Tensor db = matmul(a.value().transposed(), og);
      auto ps = sb->data();
      auto pd = db.data();
      for (std::size_t i = 0; i < ps.size(); ++i) ps[i] += pd[i];
    }
  });
}

Var transpose(Var a) {
  return a.graph().record(a.value().transposed(), {a}, [a](Graph& g, const Tensor& og) {
    if (Tensor* s = g.grad_sink(a)) {
      Tensor t = og.transposed();
      auto ps = s->data();
      auto pt = t.data();
      for (std::size_t i = 0; i < ps.size(); ++i) ps[i] += pt[i];
    }
  });
}

Var add(Var a, Var b) {
  Graph& g = a.graph();
  g.check_recordable(b);
  const Shape shape = broadcast_shape(a.value(), b.value(), "add");
  Tensor out = zip(a.value(), b.value(), shape, [](double x, double y) { return x + y; });
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& og) {
    auto gs = og.data();
    scatter(g.grad_sink(a), gs.size(), [&](std::size_t i) { return gs[i]; });
    scatter(g.grad_sink(b), gs.size(), [&](std::size_t i) { return gs[i]; });
  });
}

Var sub(Var a, Var b) {
  Graph& g = a.graph();
  g.check_recordable(b);
  const Shape shape = broadcast_shape(a.value(), b.value(), "sub");
  Tensor out = zip(a.value(), b.value(), shape, [](double x, double y) { return x - y; });
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& og) {
    auto gs = og.data();
    scatter(g.grad_sink(a), gs.size(), [&](std::size_t i) { return gs[i]; });
    scatter(g.grad_sink(b), gs.size(), [&](std::size_t i) { return -gs[i]; });
  });
}

Var mul(Var a, Var b) {
  Graph& g = a.graph();
  g.check_recordable(b);
  const Shape shape = broadcast_shape(a.value(), b.value(), "mul");
  Tensor out = zip(a.value(), b.value(), shape, [](double x, double y) { return x * y; });
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& og) {
    auto gs = og.data();
    auto xa = a.value().data(), xb = b.value().data();
    const std::size_t na = xa.size(), nb = xb.size();
    scatter(g.grad_sink(a), gs.size(), [&](std::size_t i) { return gs[i] * xb[i % nb]; });
    scatter(g.grad_sink(b), gs.size(), [&](std::size_t i) { return gs[i] * xa[i % na]; });
  });
}

Var div(Var a, Var b) {
  Graph& g = a.graph();
  g.check_recordable(b);
  for (double v : b.value().data())
    if (v == 0.0) throw NumericalError("division by zero on graph");
  const Shape shape = broadcast_shape(a.value(), b.value(), "div");
  Tensor out = zip(a.value(), b.value(), shape, [](double x, double y) { return x / y; });
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& og) {
    auto gs = og.data();
    auto xa = a.value().data(), xb = b.value().data();
    const std::size_t na = xa.size(), nb = xb.size();
    scatter(g.grad_sink(a), gs.size(), [&](std::size_t i) { return gs[i] / xb[i % nb]; });
    scatter(g.grad_sink(b), gs.size(), [&](std::size_t i) {
      const double y = xb[i % nb];
      return -gs[i] * xa[i % na] / (y * y);
    });
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return unary(a, std::move(out), [factor](double) { return factor; });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return unary(a, std::move(out), [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var square(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= v;
  return unary(a, std::move(out), [](double x) { return 2.0 * x; });
}

Var sqrt(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) {
    if (v < 0.0) throw NumericalError("sqrt of negative value " + std::to_string(v));
    v = std::sqrt(v);
  }
  return unary(a, std::move(out), [](double x) { return x > 0.0 ? 0.5 / std::sqrt(x) : 0.0; });
}

Var sum(Var a) { return reduce_all(a, 1.0); }
Var mean(Var a) { return reduce_all(a, 1.0 / static_cast<double>(a.value().numel())); }
Var sum(Var a, std::size_t axis) { return reduce_axis(a, axis, 1.0); }
Var mean(Var a, std::size_t axis) {
  const std::size_t len = reduce_dims(a.value().shape(), axis).len;
  return reduce_axis(a, axis, 1.0 / static_cast<double>(len));
}

Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels) {
  const Tensor& z = logits.value();
  if (z.rank() != 2) throw ShapeError("cross-entropy logits must be a matrix, got " + shape_string(z.shape()));
  const std::size_t b = z.rows(), c = z.cols();
  if (labels.size() != b)
    throw ShapeError("cross-entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(b) + " rows");
  Tensor probs({b, c});
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] >= c)
      throw InvalidArgument("label " + std::to_string(labels[i]) + " out of range for " + std::to_string(c) +
                            " classes");
    auto zi = z.row(i);
    const double m = *std::max_element(zi.begin(), zi.end());
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(zi[j] - m);
    for (std::size_t j = 0; j < c; ++j) probs(i, j) = std::exp(zi[j] - m) / denom;
    loss += std::log(denom) - (zi[labels[i]] - m);
  }
  loss /= static_cast<double>(b);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return logits.graph().record(Tensor::scalar(loss), {logits},
                               [logits, probs = std::move(probs), lab = std::move(lab)](Graph& g, const Tensor& og) {
                                 Tensor* sink = g.grad_sink(logits);
                                 if (!sink) return;
                                 const std::size_t b = probs.rows(), c = probs.cols();
                                 const double w = og.item() / static_cast<double>(b);
                                 for (std::size_t i = 0; i < b; ++i)
                                   for (std::size_t j = 0; j < c; ++j)
                                     (*sink)(i, j) += w * (probs(i, j) - (j == lab[i] ? 1.0 : 0.0));
                               });
}

Tensor cholesky(const Tensor& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("cholesky needs a square matrix, got " + shape_string(a.shape()));
  Tensor l({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d))
      throw NumericalError("matrix is not positive definite (pivot " + std::to_string(j) + ")",
                           static_cast<std::ptrdiff_t>(j));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Tensor cholesky_solve(const Tensor& l, const Tensor& b) {
  const std::size_t n = l.rows();
  if (b.rank() != 2 || b.rows() != n)
    throw ShapeError("solve: right-hand side " + shape_string(b.shape()) + " does not match " + shape_string(l.shape()));
  const std::size_t m = b.cols();
  Tensor x = b;
  // Forward substitution L y = b.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = l(i, k);
      for (std::size_t c = 0; c < m; ++c) x(i, c) -= lik * x(k, c);
    }
    for (std::size_t c = 0; c < m; ++c) x(i, c) /= l(i, i);
  }
  // Back substitution L^T x = y.
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) {
      const double lki = l(k, i);
      for (std::size_t c = 0; c < m; ++c) x(i, c) -= lki * x(k, c);
    }
    for (std::size_t c = 0; c < m; ++c) x(i, c) /= l(i, i);
  }
  return x;
}

Var solve_psd(Var a, Var b) {
  Graph& g = a.graph();
  g.check_recordable(b);
  const Tensor& av = a.value();
  if (av.rank() != 2 || av.rows() != av.cols())
    throw ShapeError("solve_psd: A must be square, got " + shape_string(av.shape()));
  Tensor l = cholesky(av);
  Tensor x = cholesky_solve(l, b.value());
  Tensor x_saved = x;
  return g.record(std::move(x), {a, b}, [a, b, l = std::move(l), x = std::move(x_saved)](Graph& g, const Tensor& og) {
    Tensor* sa = g.grad_sink(a);
    Tensor* sb = g.grad_sink(b);
    if (!sa && !sb) return;
    // dB = A^{-1} G (A symmetric); dA = -dB X^T, folded onto the lower triangle.
    Tensor db = cholesky_solve(l, og);
    if (sb) {
      auto ps = sb->data();
      auto pd = db.data();
      for (std::size_t i = 0; i < ps.size(); ++i) ps[i] += pd[i];
    }
    if (sa) {
      Tensor da = matmul(db, x.transposed());
      const std::size_t n = da.rows();
      for (std::size_t i = 0; i < n; ++i) {
        (*sa)(i, i) -= da(i, i);
        for (std::size_t j = 0; j < i; ++j) (*sa)(i, j) -= da(i, j) + da(j, i);
      }
    }
  });
}

}  // namespace fewshot::ad
