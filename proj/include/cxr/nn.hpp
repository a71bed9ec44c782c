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

#include <string>
#include <vector>

#include "cxr/ops.hpp"
#include "cxr/rng.hpp"
#include "cxr/tensor.hpp"

namespace cxr {

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
Index total_elements(const ParamList<T>& params) {
  Index n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

/// Per-call switches for a forward pass.
template <typename T>
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // drop-path draws; required when training with drop_path_rate > 0
  /// When set, every attention softmax output is appended here.
  std::vector<Tensor<T>>* attention_probe = nullptr;
};

// Initializers. Projections use a normal(0, 0.02) truncated at two sigma.
template <typename T>
Tensor<T> trunc_normal_param(Shape shape, Rng& rng, double sigma = 0.02);
template <typename T>
Tensor<T> constant_param(Shape shape, T value);

template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out] or undefined

  Linear() = default;
  Linear(Index in, Index out, bool with_bias, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
struct LayerNorm {
  Tensor<T> gamma;
  Tensor<T> beta;

  LayerNorm() = default;
  explicit LayerNorm(Index dim);

  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma, beta, T(1e-5)); }
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
struct Mlp {
  Linear<T> fc1;
  Linear<T> fc2;

  Mlp() = default;
  Mlp(Index dim, double ratio, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const { return fc2(gelu(fc1(x))); }
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

/// Multi-head scaled dot-product self-attention over x [G, N, C].
///
/// `logit_bias`, if defined, is added to the [G, heads, N, N] logits before
/// the softmax. It is either [heads, N, N] / [N, N] (shared by all groups) or
/// [W, heads, N, N] where G is a multiple of W and group g uses slice g % W;
/// this is how per-window masks are applied to a batch of windows.
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const Linear<T>& qkv, const Linear<T>& proj, int heads,
                               const Tensor<T>& logit_bias, std::vector<Tensor<T>>* probe = nullptr);

/// Pre-norm transformer encoder block:
///   x = x + attn(norm1(x)); x = x + mlp(norm2(x))
template <typename T>
struct TransformerBlock {
  LayerNorm<T> norm1;
  Linear<T> qkv;
  Linear<T> proj;
  LayerNorm<T> norm2;
  Mlp<T> mlp;
  int heads = 1;
  double drop_path = 0.0;

  TransformerBlock() = default;
  TransformerBlock(Index dim, int heads, double mlp_ratio, double drop_path, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, const ForwardContext<T>& ctx, const Tensor<T>& logit_bias = {}) const;
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

/// Residual branch with optional stochastic depth.
template <typename T>
Tensor<T> residual(const Tensor<T>& x, const Tensor<T>& branch, double drop_prob, const ForwardContext<T>& ctx);

/// Common surface of the image classifiers.
template <typename T>
class Classifier {
 public:
  virtual ~Classifier() = default;
  /// images [B, 3, S, S] -> logits [B, num_classes]
  virtual Tensor<T> forward(const Tensor<T>& images, const ForwardContext<T>& ctx = {}) const = 0;
  /// Stable order and names; handles share storage with the model.
  virtual ParamList<T> parameters() const = 0;
  virtual int input_size() const = 0;
  virtual int num_classes() const = 0;
};

}  // namespace cxr
