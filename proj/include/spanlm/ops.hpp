// Copyright 2026 The spanlm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spanlm/autograd.hpp"

// Differentiable primitives. Every op validates shapes eagerly and names
// both operands' shapes on mismatch. Broadcasting is limited to adding a
// trailing-dimension bias vector.
namespace spanlm::ops {

// [m,k] x [k,n] -> [m,n]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

// [m,k] x [n,k]^T -> [m,n] without materializing the transpose.
template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b);

// Elementwise sum. `b` may instead be a vector matching a's last dimension.
template <typename T>
Var<T> add(Var<T> a, Var<T> b);

template <typename T>
Var<T> sub(Var<T> a, Var<T> b);

// Elementwise (Hadamard) product of equal shapes.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);

template <typename T>
Var<T> scale(Var<T> a, T factor);

// Softmax of a 2-D tensor along axis 0 (columns) or 1 (rows).
template <typename T>
Var<T> softmax(Var<T> a, int axis);

// Row-wise normalization to zero mean / unit variance, then gamma * x + beta.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5));

// Exact GeLU: x * Phi(x) = 0.5 x (1 + erf(x / sqrt 2)).
template <typename T>
Var<T> gelu(Var<T> a);

template <typename T>
Var<T> sigmoid(Var<T> a);

// Rows of `table` ([V,h]) selected by ids -> [n,h].
template <typename T>
Var<T> embedding_lookup(Var<T> table, std::span<const std::int32_t> ids);

// sum_i weights[i] * -log softmax(logits[i])[targets[i]]. Rows with zero
// weight are skipped (their target may be negative). Returns shape [1].
template <typename T>
Var<T> cross_entropy_with_logits(Var<T> logits, std::span<const std::int32_t> targets,
                                 std::span<const T> weights);

// sum_i weights[i] * -(y_i log p_i + (1 - y_i) log(1 - p_i)) over a tensor of
// probabilities. Returns shape [1].
template <typename T>
Var<T> binary_cross_entropy(Var<T> probs, std::span<const T> labels, std::span<const T> weights);

// Same quantity as binary_cross_entropy(sigmoid(logits)), evaluated in the
// numerically stable log-sum-exp form.
template <typename T>
Var<T> binary_cross_entropy_with_logits(Var<T> logits, std::span<const T> labels,
                                        std::span<const T> weights);

// Inverted dropout. p == 0 is the identity.
template <typename T>
Var<T> dropout(Var<T> a, double p, std::uint64_t seed);

template <typename T>
Var<T> transpose(Var<T> a);

template <typename T>
Var<T> reshape(Var<T> a, Shape shape);

// Half-open [begin, end) along axis 0 or 1 of a 2-D tensor.
template <typename T>
Var<T> slice(Var<T> a, int axis, std::size_t begin, std::size_t end);

// Concatenate 2-D tensors with equal row counts along the column axis.
template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts);

// Sum of all elements -> [1].
template <typename T>
Var<T> sum(Var<T> a);

}  // namespace spanlm::ops
