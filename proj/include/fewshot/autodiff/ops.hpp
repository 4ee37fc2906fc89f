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

#include "fewshot/autodiff/graph.hpp"

/// Differentiable operations on Graph variables.
///
/// Binary elementwise operations broadcast in two ways only: a one-element
/// operand against anything, and an operand whose shape equals the other's
/// shape without its leading (batch) dimension, or with that dimension set
/// to 1. The broadcast operand's gradient is summed over the batch.
namespace fewshot::ad {

Var matmul(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Throws NumericalError on a zero divisor.
Var div(Var a, Var b);

/// Multiplies by a constant.
Var scale(Var a, double factor);
/// Subgradient 0 at 0.
Var relu(Var a);
Var square(Var a);
/// Throws NumericalError on a negative input. The derivative at exactly 0 is
/// taken as 0, the minimum-norm subgradient of a Euclidean norm at the origin.
Var sqrt(Var a);

/// Full reduction to a scalar.
Var sum(Var a);
Var mean(Var a);
/// Reduction over one axis; the axis is removed from the result shape.
Var sum(Var a, std::size_t axis);
Var mean(Var a, std::size_t axis);

/// Mean over rows of -log softmax(logits)[label], max-shifted for stability.
Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels);

/// Solves A X = B for symmetric positive definite A using a Cholesky
/// factorization of A's lower triangle (the upper triangle is not read, and
/// receives no gradient). Throws NumericalError carrying the failing pivot.
Var solve_psd(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }

/// Lower-triangular Cholesky factor of a matrix's lower triangle; throws
/// NumericalError with the index of the first non-positive pivot.
Tensor cholesky(const Tensor& a);
/// Solves (L L^T) X = B given the factor L.
Tensor cholesky_solve(const Tensor& l, const Tensor& b);

}  // namespace fewshot::ad
