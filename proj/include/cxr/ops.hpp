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

#pragma once

#include <vector>

#include "cxr/rng.hpp"
#include "cxr/tensor.hpp"

// Differentiable tensor operations.
//
// Broadcasting is deliberately narrow: two operands broadcast only when the
// smaller shape equals a trailing run of the larger one (bias [C] against
// [B, N, C], position table [N, C] against [B, N, C]) or has a single element.
// matmul applies the same rule to its leading batch dimensions.
namespace cxr {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value);

/// [.., m, k] x [.., k, n] -> [.., m, n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// x @ weight (+ bias). weight is [in, out]; bias may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Materializing axis permutation: out.shape[i] = in.shape[perm[i]].
template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<int>& perm);
template <typename T>
Tensor<T> transpose(const Tensor<T>& a, int axis0, int axis1);
/// One extent may be -1 and is inferred.
template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

/// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis);

/// Normalizes over the last axis with the population variance, then
/// applies gamma/beta (both shaped like the last axis).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5));

/// Exact GELU, x * Phi(x) with the Gaussian CDF (not the tanh approximation).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);
/// Mean over one axis, which is removed from the result.
template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, int axis);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
/// Contiguous range [start, start + length) along `axis`; rank is kept.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, Index start, Index length);
/// Gathers positions along `axis`; repeated indices are allowed and their
/// gradients are summed.
template <typename T>
Tensor<T> index_select(const Tensor<T>& x, int axis, const std::vector<Index>& indices);
/// Cyclic shift: out[i] = in[(i - shift) mod n] along `axis`.
template <typename T>
Tensor<T> roll(const Tensor<T>& x, int axis, Index shift);

/// Stochastic depth: zeroes whole samples (leading axis) with probability p
/// and rescales survivors by 1/(1-p). Identity when p == 0.
template <typename T>
Tensor<T> drop_path(const Tensor<T>& x, double p, Rng& rng);

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  return sub(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
  return mul(a, b);
}

}  // namespace cxr
