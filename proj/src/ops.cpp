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

#include "spanlm/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "spanlm/rng.hpp"

namespace spanlm::ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;

template <typename T>
ConstMap<T> as_matrix(const Tensor<T>& t) {
  return ConstMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
MutMap<T> as_matrix(Tensor<T>& t) {
  return MutMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <typename T>
void require_2d(const Var<T>& a, const char* op) {
  require(a.shape().size() == 2, std::string(op) + ": expected a 2-D tensor, got " + shape_string(a.shape()));
}

template <typename T>
void require_same_tape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

std::string pair_string(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b);
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) {
    const T z = std::exp(-x);
    return T(1) / (T(1) + z);
  }
  const T z = std::exp(x);
  return z / (T(1) + z);
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_same_tape(a, b, "matmul");
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  require(A.rank() == 2 && B.rank() == 2 && A.shape()[1] == B.shape()[0],
          pair_string("matmul", A.shape(), B.shape()));
  Tensor<T> out({A.shape()[0], B.shape()[1]});
  as_matrix(out).noalias() = as_matrix(A) * as_matrix(B);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    if (t.needs_grad(ia)) as_matrix(t.grad(ia)).noalias() += as_matrix(g) * as_matrix(t.value(ib)).transpose();
    if (t.needs_grad(ib)) as_matrix(t.grad(ib)).noalias() += as_matrix(t.value(ia)).transpose() * as_matrix(g);
  });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  require_same_tape(a, b, "matmul_nt");
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  require(A.rank() == 2 && B.rank() == 2 && A.shape()[1] == B.shape()[1],
          pair_string("matmul_nt", A.shape(), B.shape()));
  Tensor<T> out({A.shape()[0], B.shape()[0]});
  as_matrix(out).noalias() = as_matrix(A) * as_matrix(B).transpose();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    if (t.needs_grad(ia)) as_matrix(t.grad(ia)).noalias() += as_matrix(g) * as_matrix(t.value(ib));
    if (t.needs_grad(ib)) as_matrix(t.grad(ib)).noalias() += as_matrix(g).transpose() * as_matrix(t.value(ia));
  });
}

namespace {

template <typename T>
Var<T> add_impl(Var<T> a, Var<T> b, T sign, const char* op) {
  require_same_tape(a, b, op);
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  const std::size_t ia = a.id(), ib = b.id();
  if (A.shape() == B.shape()) {
    Tensor<T> out(A.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + sign * B[i];
    return a.tape().record(std::move(out), {ia, ib}, [ia, ib, sign](Tape<T>& t, std::size_t self) {
      const Tensor<T>& g = t.grad(self);
      if (t.needs_grad(ia)) {
        Tensor<T>& ga = t.grad(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (t.needs_grad(ib)) {
        Tensor<T>& gb = t.grad(ib);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
      }
    });
  }
  // Trailing-dimension bias.
  require(B.rank() == 1 && !A.shape().empty() && B.shape()[0] == A.cols(), pair_string(op, A.shape(), B.shape()));
  const std::size_t rows = A.rows(), cols = A.cols();
  Tensor<T> out(A.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = A[r * cols + c] + sign * B[c];
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib, sign, rows, cols](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor<T>& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      Tensor<T>& gb = t.grad(ib);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[c] += sign * g[r * cols + c];
    }
  });
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  return add_impl(a, b, T(1), "add");
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  return add_impl(a, b, T(-1), "sub");
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_tape(a, b, "mul");
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  require(A.shape() == B.shape(), pair_string("mul", A.shape(), B.shape()));
  Tensor<T> out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor<T>& ga = t.grad(ia);
      const Tensor<T>& vb = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.needs_grad(ib)) {
      Tensor<T>& gb = t.grad(ib);
      const Tensor<T>& va = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  const Tensor<T>& A = a.value();
  Tensor<T> out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * factor;
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, factor](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

template <typename T>
Var<T> softmax(Var<T> a, int axis) {
  require_2d(a, "softmax");
  if (axis < 0) axis += 2;
  require(axis == 0 || axis == 1, "softmax: axis must be 0 or 1 for a 2-D tensor");
  const Tensor<T>& A = a.value();
  const std::size_t rows = A.shape()[0], cols = A.shape()[1];
  // Strides for walking one softmax group: `count` elements spaced `step`
  // apart, groups starting `outer_step` apart.
  const std::size_t groups = axis == 1 ? rows : cols;
  const std::size_t count = axis == 1 ? cols : rows;
  const std::size_t step = axis == 1 ? 1 : cols;
  const std::size_t outer_step = axis == 1 ? cols : 1;
  Tensor<T> out(A.shape());
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t base = g * outer_step;
    T mx = A[base];
    for (std::size_t j = 1; j < count; ++j) mx = std::max(mx, A[base + j * step]);
    T total = 0;
    for (std::size_t j = 0; j < count; ++j) {
      const T e = std::exp(A[base + j * step] - mx);
      out[base + j * step] = e;
      total += e;
    }
    for (std::size_t j = 0; j < count; ++j) out[base + j * step] /= total;
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia},
                         [ia, groups, count, step, outer_step](Tape<T>& t, std::size_t self) {
                           const Tensor<T>& g = t.grad(self);
                           const Tensor<T>& y = t.value(self);
                           Tensor<T>& ga = t.grad(ia);
                           for (std::size_t grp = 0; grp < groups; ++grp) {
                             const std::size_t base = grp * outer_step;
                             T dot = 0;
                             for (std::size_t j = 0; j < count; ++j) dot += g[base + j * step] * y[base + j * step];
                             for (std::size_t j = 0; j < count; ++j) {
                               const std::size_t k = base + j * step;
                               ga[k] += y[k] * (g[k] - dot);
                             }
                           }
                         });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  require_same_tape(x, gamma, "layer_norm");
  require_same_tape(x, beta, "layer_norm");
  const Tensor<T>& X = x.value();
  const std::size_t rows = X.rows(), cols = X.cols();
  require(gamma.shape() == Shape{cols}, pair_string("layer_norm", X.shape(), gamma.shape()));
  require(beta.shape() == Shape{cols}, pair_string("layer_norm", X.shape(), beta.shape()));
  const Tensor<T>& G = gamma.value();
  const Tensor<T>& B = beta.value();
  auto xhat = std::make_shared<std::vector<T>>(X.size());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  Tensor<T> out(X.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = X.data() + r * cols;
    T mean = 0;
    for (std::size_t c = 0; c < cols; ++c) mean += row[c];
    mean /= T(cols);
    T var = 0;
    for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= T(cols);
    const T inv = T(1) / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t c = 0; c < cols; ++c) {
      const T h = (row[c] - mean) * inv;
      (*xhat)[r * cols + c] = h;
      out[r * cols + c] = G[c] * h + B[c];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape().record(
      std::move(out), {ix, ig, ib}, [ix, ig, ib, rows, cols, xhat, inv_std](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& G = t.value(ig);
        if (t.needs_grad(ig)) {
          Tensor<T>& gg = t.grad(ig);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) gg[c] += g[r * cols + c] * (*xhat)[r * cols + c];
        }
        if (t.needs_grad(ib)) {
          Tensor<T>& gb = t.grad(ib);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
        }
        if (t.needs_grad(ix)) {
          Tensor<T>& gx = t.grad(ix);
          const T n = T(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            T sum_d = 0, sum_dh = 0;
            for (std::size_t c = 0; c < cols; ++c) {
              const T d = g[r * cols + c] * G[c];
              sum_d += d;
              sum_dh += d * (*xhat)[r * cols + c];
            }
            const T inv = (*inv_std)[r];
            for (std::size_t c = 0; c < cols; ++c) {
              const T d = g[r * cols + c] * G[c];
              gx[r * cols + c] += inv / n * (n * d - sum_d - (*xhat)[r * cols + c] * sum_dh);
            }
          }
        }
      });
}

template <typename T>
Var<T> gelu(Var<T> a) {
  const Tensor<T>& A = a.value();
  Tensor<T> out(A.shape());
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(0.5) * A[i] * (T(1) + std::erf(A[i] * inv_sqrt2));
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, inv_sqrt2](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& x = t.value(ia);
    Tensor<T>& ga = t.grad(ia);
    const T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T cdf = T(0.5) * (T(1) + std::erf(x[i] * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x[i] * x[i]);
      ga[i] += g[i] * (cdf + x[i] * pdf);
    }
  });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  const Tensor<T>& A = a.value();
  Tensor<T> out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(A[i]);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& y = t.value(self);
    Tensor<T>& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var<T> embedding_lookup(Var<T> table, std::span<const std::int32_t> ids) {
  require_2d(table, "embedding_lookup");
  const Tensor<T>& E = table.value();
  const std::size_t vocab = E.shape()[0], dim = E.shape()[1];
  Tensor<T> out({ids.size(), dim});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
      throw std::out_of_range("embedding_lookup: id " + std::to_string(ids[r]) + " outside table " +
                              shape_string(E.shape()));
    }
    std::copy_n(E.data() + static_cast<std::size_t>(ids[r]) * dim, dim, out.data() + r * dim);
  }
  const std::size_t it = table.id();
  return table.tape().record(std::move(out), {it},
                             [it, dim, idv = std::vector<std::int32_t>(ids.begin(), ids.end())](
                                 Tape<T>& t, std::size_t self) {
                               const Tensor<T>& g = t.grad(self);
                               Tensor<T>& ge = t.grad(it);
                               for (std::size_t r = 0; r < idv.size(); ++r) {
                                 T* dst = ge.data() + static_cast<std::size_t>(idv[r]) * dim;
                                 const T* src = g.data() + r * dim;
                                 for (std::size_t c = 0; c < dim; ++c) dst[c] += src[c];
                               }
                             });
}

template <typename T>
Var<T> cross_entropy_with_logits(Var<T> logits, std::span<const std::int32_t> targets,
                                 std::span<const T> weights) {
  require_2d(logits, "cross_entropy_with_logits");
  const Tensor<T>& X = logits.value();
  const std::size_t rows = X.shape()[0], cols = X.shape()[1];
  require(targets.size() == rows && weights.size() == rows,
          "cross_entropy_with_logits: logits " + shape_string(X.shape()) + " vs " + std::to_string(targets.size()) +
              " targets / " + std::to_string(weights.size()) + " weights");
  auto probs = std::make_shared<std::vector<T>>(X.size(), T(0));
  T loss = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (weights[r] == T(0)) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= cols) {
      throw std::out_of_range("cross_entropy_with_logits: target " + std::to_string(targets[r]) +
                              " outside " + std::to_string(cols) + " classes");
    }
    const T* row = X.data() + r * cols;
    const T mx = *std::max_element(row, row + cols);
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(row[c] - mx);
    const T lse = mx + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) (*probs)[r * cols + c] = std::exp(row[c] - lse);
    loss += weights[r] * (lse - row[targets[r]]);
  }
  const std::size_t ix = logits.id();
  return logits.tape().record(
      Tensor<T>::scalar(loss), {ix},
      [ix, rows, cols, probs, tv = std::vector<std::int32_t>(targets.begin(), targets.end()),
       wv = std::vector<T>(weights.begin(), weights.end())](Tape<T>& t, std::size_t self) {
        const T g0 = t.grad(self)[0];
        Tensor<T>& gx = t.grad(ix);
        for (std::size_t r = 0; r < rows; ++r) {
          if (wv[r] == T(0)) continue;
          const T f = g0 * wv[r];
          for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += f * (*probs)[r * cols + c];
          gx[r * cols + static_cast<std::size_t>(tv[r])] -= f;
        }
      });
}

template <typename T>
Var<T> binary_cross_entropy(Var<T> probs, std::span<const T> labels, std::span<const T> weights) {
  const Tensor<T>& P = probs.value();
  require(labels.size() == P.size() && weights.size() == P.size(),
          "binary_cross_entropy: probabilities " + shape_string(P.shape()) + " vs " +
              std::to_string(labels.size()) + " labels / " + std::to_string(weights.size()) + " weights");
  T loss = 0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (weights[i] == T(0)) continue;
    loss -= weights[i] * (labels[i] * std::log(P[i]) + (T(1) - labels[i]) * std::log(T(1) - P[i]));
  }
  const std::size_t ip = probs.id();
  return probs.tape().record(Tensor<T>::scalar(loss), {ip},
                             [ip, lv = std::vector<T>(labels.begin(), labels.end()),
                              wv = std::vector<T>(weights.begin(), weights.end())](Tape<T>& t, std::size_t self) {
                               const T g0 = t.grad(self)[0];
                               const Tensor<T>& p = t.value(ip);
                               Tensor<T>& gp = t.grad(ip);
                               for (std::size_t i = 0; i < p.size(); ++i) {
                                 if (wv[i] == T(0)) continue;
                                 gp[i] += g0 * wv[i] * (-lv[i] / p[i] + (T(1) - lv[i]) / (T(1) - p[i]));
                               }
                             });
}

template <typename T>
Var<T> binary_cross_entropy_with_logits(Var<T> logits, std::span<const T> labels, std::span<const T> weights) {
  const Tensor<T>& X = logits.value();
  require(labels.size() == X.size() && weights.size() == X.size(),
          "binary_cross_entropy_with_logits: logits " + shape_string(X.shape()) + " vs " +
              std::to_string(labels.size()) + " labels / " + std::to_string(weights.size()) + " weights");
  T loss = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (weights[i] == T(0)) continue;
    const T x = X[i];
    loss += weights[i] * (std::max(x, T(0)) - x * labels[i] + std::log1p(std::exp(-std::abs(x))));
  }
  const std::size_t ix = logits.id();
  return logits.tape().record(Tensor<T>::scalar(loss), {ix},
                              [ix, lv = std::vector<T>(labels.begin(), labels.end()),
                               wv = std::vector<T>(weights.begin(), weights.end())](Tape<T>& t, std::size_t self) {
                                const T g0 = t.grad(self)[0];
                                const Tensor<T>& x = t.value(ix);
                                Tensor<T>& gx = t.grad(ix);
                                for (std::size_t i = 0; i < x.size(); ++i) {
                                  if (wv[i] == T(0)) continue;
                                  gx[i] += g0 * wv[i] * (stable_sigmoid(x[i]) - lv[i]);
                                }
                              });
}

template <typename T>
Var<T> dropout(Var<T> a, double p, std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  if (p == 0.0) return a;
  const Tensor<T>& A = a.value();
  Rng rng(seed);
  auto mask = std::make_shared<std::vector<T>>(A.size());
  const T keep_scale = T(1.0 / (1.0 - p));
  Tensor<T> out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) {
    (*mask)[i] = rng.uniform01() < p ? T(0) : keep_scale;
    out[i] = A[i] * (*mask)[i];
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, mask](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*mask)[i];
  });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  require_2d(a, "transpose");
  const Tensor<T>& A = a.value();
  const std::size_t rows = A.shape()[0], cols = A.shape()[1];
  Tensor<T> out({cols, rows});
  as_matrix(out) = as_matrix(A).transpose();
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia](Tape<T>& t, std::size_t self) {
    as_matrix(t.grad(ia)) += as_matrix(t.grad(self)).transpose();
  });
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  const Tensor<T>& A = a.value();
  require(shape_size(shape) == A.size(), pair_string("reshape", A.shape(), shape));
  Tensor<T> out(std::move(shape), A.storage());
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

template <typename T>
Var<T> slice(Var<T> a, int axis, std::size_t begin, std::size_t end) {
  require_2d(a, "slice");
  require(axis == 0 || axis == 1, "slice: axis must be 0 or 1");
  const Tensor<T>& A = a.value();
  const std::size_t rows = A.shape()[0], cols = A.shape()[1];
  const std::size_t extent = axis == 0 ? rows : cols;
  require(begin < end && end <= extent, "slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                            ") outside axis " + std::to_string(axis) + " of " +
                                            shape_string(A.shape()));
  const std::size_t r0 = axis == 0 ? begin : 0, r1 = axis == 0 ? end : rows;
  const std::size_t c0 = axis == 1 ? begin : 0, c1 = axis == 1 ? end : cols;
  Tensor<T> out({r1 - r0, c1 - c0});
  as_matrix(out) = as_matrix(A).block(r0, c0, r1 - r0, c1 - c0);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, r0, r1, c0, c1](Tape<T>& t, std::size_t self) {
    as_matrix(t.grad(ia)).block(r0, c0, r1 - r0, c1 - c0) += as_matrix(t.grad(self));
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t rows = parts[0].shape().at(0);
  std::size_t total = 0;
  std::vector<std::size_t> ids, widths;
  for (const Var<T>& p : parts) {
    require_2d(p, "concat_cols");
    require_same_tape(parts[0], p, "concat_cols");
    require(p.shape()[0] == rows, pair_string("concat_cols", parts[0].shape(), p.shape()));
    ids.push_back(p.id());
    widths.push_back(p.shape()[1]);
    total += p.shape()[1];
  }
  Tensor<T> out({rows, total});
  std::size_t offset = 0;
  for (const Var<T>& p : parts) {
    as_matrix(out).block(0, offset, rows, p.shape()[1]) = as_matrix(p.value());
    offset += p.shape()[1];
  }
  return parts[0].tape().record(std::move(out), ids, [ids, widths, rows](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.needs_grad(ids[k])) as_matrix(t.grad(ids[k])) += as_matrix(g).block(0, off, rows, widths[k]);
      off += widths[k];
    }
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  const Tensor<T>& A = a.value();
  T total = 0;
  for (std::size_t i = 0; i < A.size(); ++i) total += A[i];
  const std::size_t ia = a.id();
  return a.tape().record(Tensor<T>::scalar(total), {ia}, [ia](Tape<T>& t, std::size_t self) {
    const T g0 = t.grad(self)[0];
    Tensor<T>& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g0;
  });
}

#define SPANLM_INSTANTIATE_OPS(T)                                                                         \
  template Var<T> matmul(Var<T>, Var<T>);                                                                 \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                                              \
  template Var<T> add(Var<T>, Var<T>);                                                                    \
  template Var<T> sub(Var<T>, Var<T>);                                                                    \
  template Var<T> mul(Var<T>, Var<T>);                                                                    \
  template Var<T> scale(Var<T>, T);                                                                       \
  template Var<T> softmax(Var<T>, int);                                                                   \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                                  \
  template Var<T> gelu(Var<T>);                                                                           \
  template Var<T> sigmoid(Var<T>);                                                                        \
  template Var<T> embedding_lookup(Var<T>, std::span<const std::int32_t>);                                \
  template Var<T> cross_entropy_with_logits(Var<T>, std::span<const std::int32_t>, std::span<const T>);   \
  template Var<T> binary_cross_entropy(Var<T>, std::span<const T>, std::span<const T>);                   \
  template Var<T> binary_cross_entropy_with_logits(Var<T>, std::span<const T>, std::span<const T>);       \
  template Var<T> dropout(Var<T>, double, std::uint64_t);                                                 \
  template Var<T> transpose(Var<T>);                                                                      \
  template Var<T> reshape(Var<T>, Shape);                                                                 \
  template Var<T> slice(Var<T>, int, std::size_t, std::size_t);                                           \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                                \
  template Var<T> sum(Var<T>);

SPANLM_INSTANTIATE_OPS(float)
SPANLM_INSTANTIATE_OPS(double)

#undef SPANLM_INSTANTIATE_OPS

}  // namespace spanlm::ops
