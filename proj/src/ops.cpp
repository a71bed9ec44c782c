// Copyright (c) 2026 The cxrformer Authors. All Rights Reserved.
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

#include "cxr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cxr/error.hpp"

namespace cxr {

namespace {

template <typename T>
using NodeT = detail::Node<T>;

int normalize_axis(int axis, int rank, const char* op) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank)
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank));
  return a;
}

// outer * extent * inner decomposition around one axis.
struct AxisSplit {
  Index outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

// Output shape for a suffix broadcast of a and b.
Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return a;
  const Index na = numel(a), nb = numel(b);
  if (nb == 1 && na >= 1 && (b.size() <= a.size() || na == 1)) return b.size() > a.size() ? b : a;
  if (na == 1 && a.size() <= b.size()) return b;
  if (na >= nb && is_suffix(b, a)) return a;
  if (nb > na && is_suffix(a, b)) return b;
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
}

// Accumulates g (length n) into dst (length m, m divides n) by folding the
// repeated leading blocks.
template <typename T>
void fold_into(std::vector<T>& dst, const std::vector<T>& g) {
  const std::size_t m = dst.size(), n = g.size();
  if (m == n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += g[i];
    return;
  }
  for (std::size_t r = 0; r < n; r += m)
    for (std::size_t j = 0; j < m; ++j) dst[j] += g[r + j];
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape(), "add");
  const std::size_t n = static_cast<std::size_t>(numel(out_shape));
  const auto A = a.data();
  const auto B = b.data();
  const std::size_t na = A.size(), nb = B.size();
  std::vector<T> out(n);
  if (na == n && nb == n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = A[i] + B[i];
  } else if (na == n) {
    for (std::size_t r = 0; r < n; r += nb)
      for (std::size_t j = 0; j < nb; ++j) out[r + j] = A[r + j] + B[j];
  } else {
    for (std::size_t r = 0; r < n; r += na)
      for (std::size_t j = 0; j < na; ++j) out[r + j] = A[j] + B[r + j];
  }
  return make_result<T>(std::move(out_shape), std::move(out), {a, b},
                        [](NodeT<T>& self) {
                          for (auto& in : self.inputs)
                            if (in->requires_grad) fold_into(in->ensure_grad(), self.grad);
                        },
                        "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, scale(b, T(-1)));
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape(), "mul");
  const std::size_t n = static_cast<std::size_t>(numel(out_shape));
  const auto A = a.data();
  const auto B = b.data();
  const std::size_t na = A.size(), nb = B.size();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = A[i % na] * B[i % nb];
  return make_result<T>(
      std::move(out_shape), std::move(out), {a, b},
      [](NodeT<T>& self) {
        auto& ia = *self.inputs[0];
        auto& ib = *self.inputs[1];
        const std::size_t n = self.grad.size(), na = ia.data.size(), nb = ib.data.size();
        if (ia.requires_grad) {
          auto& ga = ia.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) ga[i % na] += self.grad[i] * ib.data[i % nb];
        }
        if (ib.requires_grad) {
          auto& gb = ib.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) gb[i % nb] += self.grad[i] * ia.data[i % na];
        }
      },
      "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return make_result<T>(a.shape(), std::move(out), {a},
                        [factor](NodeT<T>& self) {
                          auto& g = self.inputs[0]->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
                        },
                        "scale");
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v += value;
  return make_result<T>(a.shape(), std::move(out), {a},
                        [](NodeT<T>& self) { fold_into(self.inputs[0]->ensure_grad(), self.grad); },
                        "add_scalar");
}

// ---------------------------------------------------------------------------
// Matrix product

namespace {

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, Index m, Index k, Index n) {
  for (Index i = 0; i < m; ++i) {
    T* c = C + i * n;
    for (Index p = 0; p < k; ++p) {
      const T av = A[i * k + p];
      const T* b = B + p * n;
      for (Index j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// C[m,k] += G[m,n] * B[k,n]^T
template <typename T>
void gemm_nt(const T* G, const T* B, T* C, Index m, Index n, Index k) {
  for (Index i = 0; i < m; ++i) {
    const T* g = G + i * n;
    for (Index p = 0; p < k; ++p) {
      const T* b = B + p * n;
      T acc = 0;
      for (Index j = 0; j < n; ++j) acc += g[j] * b[j];
      C[i * k + p] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T * G[m,n]
template <typename T>
void gemm_tn(const T* A, const T* G, T* C, Index m, Index k, Index n) {
  for (Index i = 0; i < m; ++i) {
    const T* g = G + i * n;
    for (Index p = 0; p < k; ++p) {
      const T av = A[i * k + p];
      T* c = C + p * n;
      for (Index j = 0; j < n; ++j) c[j] += av * g[j];
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2)
    throw ShapeError("matmul: operands need rank >= 2, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const Index m = a.dim(-2), k = a.dim(-1), k2 = b.dim(-2), n = b.dim(-1);
  if (k != k2)
    throw ShapeError("matmul: inner extents differ for " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  Shape batch;
  if (is_suffix(batch_b, batch_a)) {
    batch = batch_a;
  } else if (is_suffix(batch_a, batch_b)) {
    batch = batch_b;
  } else {
    throw ShapeError("matmul: batch dimensions of " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " do not broadcast");
  }
  const Index nbatch = numel(batch), ba = numel(batch_a), bb = numel(batch_b);
  std::vector<T> out(static_cast<std::size_t>(nbatch * m * n), T(0));
  const T* A = a.data().data();
  const T* B = b.data().data();
  for (Index i = 0; i < nbatch; ++i)
    gemm_nn(A + (i % ba) * m * k, B + (i % bb) * k * n, out.data() + i * m * n, m, k, n);
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  return make_result<T>(
      std::move(out_shape), std::move(out), {a, b},
      [nbatch, ba, bb, m, k, n](NodeT<T>& self) {
        auto& ia = *self.inputs[0];
        auto& ib = *self.inputs[1];
        const T* G = self.grad.data();
        if (ia.requires_grad) {
          T* gA = ia.ensure_grad().data();
          for (Index i = 0; i < nbatch; ++i)
            gemm_nt(G + i * m * n, ib.data.data() + (i % bb) * k * n, gA + (i % ba) * m * k, m, n, k);
        }
        if (ib.requires_grad) {
          T* gB = ib.ensure_grad().data();
          for (Index i = 0; i < nbatch; ++i)
            gemm_tn(ia.data.data() + (i % ba) * m * k, G + i * m * n, gB + (i % bb) * k * n, m, k, n);
        }
      },
      "matmul");
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  Tensor<T> y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

// ---------------------------------------------------------------------------
// Layout

namespace {

// For every output position, the flat offset of its source element.
std::vector<Index> permute_map(const Shape& in, const std::vector<int>& perm) {
  const std::size_t r = in.size();
  std::vector<Index> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  std::vector<Index> out_ext(r), step(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_ext[i] = in[static_cast<std::size_t>(perm[i])];
    step[i] = in_stride[static_cast<std::size_t>(perm[i])];
  }
  const Index n = numel(in);
  std::vector<Index> map(static_cast<std::size_t>(n));
  std::vector<Index> counter(r, 0);
  Index off = 0;
  for (Index i = 0; i < n; ++i) {
    map[static_cast<std::size_t>(i)] = off;
    for (std::size_t d = r; d-- > 0;) {
      if (++counter[d] < out_ext[d]) {
        off += step[d];
        break;
      }
      off -= step[d] * (out_ext[d] - 1);
      counter[d] = 0;
    }
  }
  return map;
}

template <typename T>
Tensor<T> gather_flat(const Tensor<T>& x, Shape out_shape, std::vector<Index> map, const char* op) {
  const auto X = x.data();
  std::vector<T> out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = X[static_cast<std::size_t>(map[i])];
  return make_result<T>(std::move(out_shape), std::move(out), {x},
                        [map = std::move(map)](NodeT<T>& self) {
                          auto& g = self.inputs[0]->ensure_grad();
                          for (std::size_t i = 0; i < map.size(); ++i)
                            g[static_cast<std::size_t>(map[i])] += self.grad[i];
                        },
                        op);
}

}  // namespace

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<int>& perm) {
  const int r = a.rank();
  if (static_cast<int>(perm.size()) != r)
    throw ShapeError("permute: permutation length does not match shape " + shape_str(a.shape()));
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  Shape out_shape(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const int p = perm[static_cast<std::size_t>(i)];
    if (p < 0 || p >= r || seen[static_cast<std::size_t>(p)])
      throw ShapeError("permute: invalid permutation");
    seen[static_cast<std::size_t>(p)] = true;
    out_shape[static_cast<std::size_t>(i)] = a.shape()[static_cast<std::size_t>(p)];
  }
  return gather_flat(a, std::move(out_shape), permute_map(a.shape(), perm), "permute");
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a, int axis0, int axis1) {
  const int r = a.rank();
  std::vector<int> perm(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::swap(perm[static_cast<std::size_t>(normalize_axis(axis0, r, "transpose"))],
            perm[static_cast<std::size_t>(normalize_axis(axis1, r, "transpose"))]);
  return permute(a, perm);
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  Index known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw ShapeError("reshape: more than one inferred extent");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0 && known > 0 && a.numel() % known == 0)
    shape[static_cast<std::size_t>(infer)] = a.numel() / known;
  if (numel(shape) != a.numel() || std::any_of(shape.begin(), shape.end(), [](Index d) { return d <= 0; }))
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<T> out(a.data().begin(), a.data().end());
  return make_result<T>(std::move(shape), std::move(out), {a},
                        [](NodeT<T>& self) { fold_into(self.inputs[0]->ensure_grad(), self.grad); },
                        "reshape");
}

// ---------------------------------------------------------------------------
// Normalizations and nonlinearities

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const int ax = normalize_axis(axis, x.rank(), "softmax");
  const AxisSplit s = split_at(x.shape(), ax);
  const auto X = x.data();
  std::vector<T> out(X.size());
  for (Index o = 0; o < s.outer; ++o) {
    for (Index in = 0; in < s.inner; ++in) {
      const Index base = o * s.extent * s.inner + in;
      T mx = X[static_cast<std::size_t>(base)];
      for (Index j = 1; j < s.extent; ++j) mx = std::max(mx, X[static_cast<std::size_t>(base + j * s.inner)]);
      T total = 0;
      for (Index j = 0; j < s.extent; ++j) {
        const auto idx = static_cast<std::size_t>(base + j * s.inner);
        out[idx] = std::exp(X[idx] - mx);
        total += out[idx];
      }
      for (Index j = 0; j < s.extent; ++j) out[static_cast<std::size_t>(base + j * s.inner)] /= total;
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x},
                        [s](NodeT<T>& self) {
                          auto& g = self.inputs[0]->ensure_grad();
                          const auto& y = self.data;
                          const auto& gy = self.grad;
                          for (Index o = 0; o < s.outer; ++o) {
                            for (Index in = 0; in < s.inner; ++in) {
                              const Index base = o * s.extent * s.inner + in;
                              T dot = 0;
                              for (Index j = 0; j < s.extent; ++j) {
                                const auto idx = static_cast<std::size_t>(base + j * s.inner);
                                dot += gy[idx] * y[idx];
                              }
                              for (Index j = 0; j < s.extent; ++j) {
                                const auto idx = static_cast<std::size_t>(base + j * s.inner);
                                g[idx] += y[idx] * (gy[idx] - dot);
                              }
                            }
                          }
                        },
                        "softmax");
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (!(eps > T(0))) throw ConfigError("layer_norm: eps must be positive");
  const Index d = x.dim(-1);
  if (gamma.numel() != d || beta.numel() != d)
    throw ShapeError("layer_norm: gamma/beta must have " + std::to_string(d) + " elements, got " +
                     shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
  const Index rows = x.numel() / d;
  const auto X = x.data();
  const auto G = gamma.data();
  const auto B = beta.data();
  std::vector<T> out(X.size());
  std::vector<T> rstd(static_cast<std::size_t>(rows));
  std::vector<T> means(static_cast<std::size_t>(rows));
  for (Index r = 0; r < rows; ++r) {
    const T* row = X.data() + r * d;
    T mu = 0;
    for (Index j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (Index j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    means[static_cast<std::size_t>(r)] = mu;
    rstd[static_cast<std::size_t>(r)] = rs;
    for (Index j = 0; j < d; ++j) out[static_cast<std::size_t>(r * d + j)] = (row[j] - mu) * rs * G[j] + B[j];
  }
  return make_result<T>(
      x.shape(), std::move(out), {x, gamma, beta},
      [d, rows, means = std::move(means), rstd = std::move(rstd)](NodeT<T>& self) {
        auto& ix = *self.inputs[0];
        auto& ig = *self.inputs[1];
        auto& ib = *self.inputs[2];
        const auto& gy = self.grad;
        std::vector<T> xhat(static_cast<std::size_t>(d)), gxhat(static_cast<std::size_t>(d));
        for (Index r = 0; r < rows; ++r) {
          const T mu = means[static_cast<std::size_t>(r)];
          const T rs = rstd[static_cast<std::size_t>(r)];
          T mean_g = 0, mean_gx = 0;
          for (Index j = 0; j < d; ++j) {
            const auto idx = static_cast<std::size_t>(r * d + j);
            xhat[j] = (ix.data[idx] - mu) * rs;
            gxhat[j] = gy[idx] * ig.data[j];
            mean_g += gxhat[j];
            mean_gx += gxhat[j] * xhat[j];
          }
          mean_g /= static_cast<T>(d);
          mean_gx /= static_cast<T>(d);
          if (ix.requires_grad) {
            auto& gx = ix.ensure_grad();
            for (Index j = 0; j < d; ++j)
              gx[static_cast<std::size_t>(r * d + j)] += rs * (gxhat[j] - mean_g - xhat[j] * mean_gx);
          }
          if (ig.requires_grad) {
            auto& gg = ig.ensure_grad();
            for (Index j = 0; j < d; ++j) gg[j] += gy[static_cast<std::size_t>(r * d + j)] * xhat[j];
          }
          if (ib.requires_grad) {
            auto& gb = ib.ensure_grad();
            for (Index j = 0; j < d; ++j) gb[j] += gy[static_cast<std::size_t>(r * d + j)];
          }
        }
      },
      "layer_norm");
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  const auto X = x.data();
  std::vector<T> out(X.size());
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = T(0.5) * X[i] * (T(1) + std::erf(X[i] * inv_sqrt2));
  return make_result<T>(x.shape(), std::move(out), {x},
                        [inv_sqrt2](NodeT<T>& self) {
                          auto& in = *self.inputs[0];
                          auto& g = in.ensure_grad();
                          const T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            const T v = in.data[i];
                            const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
                            const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
                            g[i] += self.grad[i] * (cdf + v * pdf);
                          }
                        },
                        "gelu");
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  return make_result<T>(Shape{}, std::vector<T>{total}, {x},
                        [](NodeT<T>& self) {
                          auto& g = self.inputs[0]->ensure_grad();
                          for (auto& v : g) v += self.grad[0];
                        },
                        "sum");
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, int axis) {
  const int ax = normalize_axis(axis, x.rank(), "mean_axis");
  const AxisSplit s = split_at(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + ax);
  const auto X = x.data();
  std::vector<T> out(static_cast<std::size_t>(s.outer * s.inner), T(0));
  const T inv = T(1) / static_cast<T>(s.extent);
  for (Index o = 0; o < s.outer; ++o)
    for (Index j = 0; j < s.extent; ++j)
      for (Index in = 0; in < s.inner; ++in)
        out[static_cast<std::size_t>(o * s.inner + in)] += X[static_cast<std::size_t>((o * s.extent + j) * s.inner + in)];
  for (auto& v : out) v *= inv;
  return make_result<T>(std::move(out_shape), std::move(out), {x},
                        [s, inv](NodeT<T>& self) {
                          auto& g = self.inputs[0]->ensure_grad();
                          for (Index o = 0; o < s.outer; ++o)
                            for (Index j = 0; j < s.extent; ++j)
                              for (Index in = 0; in < s.inner; ++in)
                                g[static_cast<std::size_t>((o * s.extent + j) * s.inner + in)] +=
                                    inv * self.grad[static_cast<std::size_t>(o * s.inner + in)];
                        },
                        "mean_axis");
}

// ---------------------------------------------------------------------------
// Indexing

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int r = parts[0].rank();
  const int ax = normalize_axis(axis, r, "concat");
  Shape out_shape = parts[0].shape();
  out_shape[ax] = 0;
  std::vector<Index> extents;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (p.rank() != r) throw ShapeError("concat: rank mismatch");
    probe[ax] = parts[0].shape()[ax];
    if (probe != parts[0].shape())
      throw ShapeError("concat: " + shape_str(p.shape()) + " incompatible with " +
                       shape_str(parts[0].shape()) + " along axis " + std::to_string(axis));
    extents.push_back(p.shape()[ax]);
    out_shape[ax] += p.shape()[ax];
  }
  const AxisSplit s = split_at(out_shape, ax);
  std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
  Index offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto P = parts[k].data();
    const Index e = extents[k];
    for (Index o = 0; o < s.outer; ++o)
      std::copy_n(P.data() + o * e * s.inner, e * s.inner, out.data() + (o * s.extent + offset) * s.inner);
    offset += e;
  }
  return make_result<T>(std::move(out_shape), std::move(out), parts,
                        [s, extents](NodeT<T>& self) {
                          Index offset = 0;
                          for (std::size_t k = 0; k < extents.size(); ++k) {
                            const Index e = extents[k];
                            if (self.inputs[k]->requires_grad) {
                              auto& g = self.inputs[k]->ensure_grad();
                              for (Index o = 0; o < s.outer; ++o)
                                for (Index t = 0; t < e * s.inner; ++t)
                                  g[static_cast<std::size_t>(o * e * s.inner + t)] +=
                                      self.grad[static_cast<std::size_t>((o * s.extent + offset) * s.inner + t)];
                            }
                            offset += e;
                          }
                        },
                        "concat");
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, Index start, Index length) {
  const int ax = normalize_axis(axis, x.rank(), "slice");
  const AxisSplit s = split_at(x.shape(), ax);
  if (start < 0 || length <= 0 || start + length > s.extent)
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") out of bounds for " + shape_str(x.shape()));
  std::vector<Index> idx(static_cast<std::size_t>(length));
  for (Index i = 0; i < length; ++i) idx[static_cast<std::size_t>(i)] = start + i;
  return index_select(x, ax, idx);
}

template <typename T>
Tensor<T> index_select(const Tensor<T>& x, int axis, const std::vector<Index>& indices) {
  const int ax = normalize_axis(axis, x.rank(), "index_select");
  const AxisSplit s = split_at(x.shape(), ax);
  if (indices.empty()) throw ShapeError("index_select: empty index list");
  for (Index i : indices)
    if (i < 0 || i >= s.extent) throw ShapeError("index_select: index " + std::to_string(i) + " out of range");
  Shape out_shape = x.shape();
  out_shape[ax] = static_cast<Index>(indices.size());
  const Index m = static_cast<Index>(indices.size());
  std::vector<Index> map(static_cast<std::size_t>(s.outer * m * s.inner));
  std::size_t p = 0;
  for (Index o = 0; o < s.outer; ++o)
    for (Index j = 0; j < m; ++j)
      for (Index in = 0; in < s.inner; ++in)
        map[p++] = (o * s.extent + indices[static_cast<std::size_t>(j)]) * s.inner + in;
  return gather_flat(x, std::move(out_shape), std::move(map), "index_select");
}

template <typename T>
Tensor<T> roll(const Tensor<T>& x, int axis, Index shift) {
  const Index n = x.dim(axis);
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = (((i - shift) % n) + n) % n;
  return index_select(x, axis, idx);
}

template <typename T>
Tensor<T> drop_path(const Tensor<T>& x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("drop_path: probability must be < 1");
  const Index batch = x.dim(0);
  const Index per = x.numel() / batch;
  std::vector<T> keep(static_cast<std::size_t>(x.numel()));
  for (Index b = 0; b < batch; ++b) {
    const T v = rng.bernoulli(1.0 - p) ? static_cast<T>(1.0 / (1.0 - p)) : T(0);
    std::fill_n(keep.begin() + b * per, per, v);
  }
  return mul(x, Tensor<T>(x.shape(), std::move(keep)));
}

#define CXR_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                                \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                           \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<int>&);                        \
  template Tensor<T> transpose(const Tensor<T>&, int, int);                                     \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                          \
  template Tensor<T> softmax(const Tensor<T>&, int);                                            \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);       \
  template Tensor<T> gelu(const Tensor<T>&);                                                    \
  template Tensor<T> sum(const Tensor<T>&);                                                     \
  template Tensor<T> mean(const Tensor<T>&);                                                    \
  template Tensor<T> mean_axis(const Tensor<T>&, int);                                          \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                \
  template Tensor<T> slice(const Tensor<T>&, int, Index, Index);                                \
  template Tensor<T> index_select(const Tensor<T>&, int, const std::vector<Index>&);            \
  template Tensor<T> roll(const Tensor<T>&, int, Index);                                        \
  template Tensor<T> drop_path(const Tensor<T>&, double, Rng&);

CXR_INSTANTIATE_OPS(float)
CXR_INSTANTIATE_OPS(double)

#undef CXR_INSTANTIATE_OPS

}  // namespace cxr
