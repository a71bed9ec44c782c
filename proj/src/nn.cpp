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

#include "cxr/nn.hpp"

#include <cmath>

#include "cxr/error.hpp"

namespace cxr {

template <typename T>
Tensor<T> trunc_normal_param(Shape shape, Rng& rng, double sigma) {
  std::vector<T> values(static_cast<std::size_t>(numel(shape)));
  for (auto& v : values) v = static_cast<T>(rng.truncated_normal(sigma, 2.0));
  return Tensor<T>(std::move(shape), std::move(values), true);
}

template <typename T>
Tensor<T> constant_param(Shape shape, T value) {
  std::vector<T> values(static_cast<std::size_t>(numel(shape)), value);
  return Tensor<T>(std::move(shape), std::move(values), true);
}

template <typename T>
Linear<T>::Linear(Index in, Index out, bool with_bias, Rng& rng)
    : weight(trunc_normal_param<T>({in, out}, rng)) {
  if (with_bias) bias = constant_param<T>({out}, T(0));
}

template <typename T>
void Linear<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

template <typename T>
LayerNorm<T>::LayerNorm(Index dim) : gamma(constant_param<T>({dim}, T(1))), beta(constant_param<T>({dim}, T(0))) {}

template <typename T>
void LayerNorm<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", gamma});
  out.push_back({prefix + ".bias", beta});
}

template <typename T>
Mlp<T>::Mlp(Index dim, double ratio, Rng& rng) {
  const auto hidden = static_cast<Index>(static_cast<double>(dim) * ratio);
  fc1 = Linear<T>(dim, hidden, true, rng);
  fc2 = Linear<T>(hidden, dim, true, rng);
}

template <typename T>
void Mlp<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  fc1.collect(out, prefix + ".fc1");
  fc2.collect(out, prefix + ".fc2");
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const Linear<T>& qkv, const Linear<T>& proj, int heads,
                               const Tensor<T>& logit_bias, std::vector<Tensor<T>>* probe) {
  if (x.rank() != 3) throw ShapeError("attention: expected [groups, tokens, channels], got " + shape_str(x.shape()));
  const Index groups = x.dim(0), tokens = x.dim(1), channels = x.dim(2);
  if (heads < 1 || channels % heads != 0)
    throw ShapeError("attention: " + std::to_string(channels) + " channels not divisible by " +
                     std::to_string(heads) + " heads");
  const Index head_dim = channels / heads;

  // [G, N, 3C] -> [3, G, heads, N, d]
  const auto packed = permute(reshape(qkv(x), {groups, tokens, 3, heads, head_dim}), {2, 0, 3, 1, 4});
  auto part = [&](Index i) { return reshape(slice(packed, 0, i, 1), {groups, heads, tokens, head_dim}); };
  const auto q = scale(part(0), static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim))));
  const auto k = part(1);
  const auto v = part(2);

  auto logits = matmul(q, transpose(k, -2, -1));  // [G, heads, N, N]
  if (logit_bias.defined()) {
    if (logit_bias.rank() == 4 && logit_bias.dim(0) != groups) {
      const Index windows = logit_bias.dim(0);
      if (groups % windows != 0)
        throw ShapeError("attention: " + std::to_string(groups) + " groups not a multiple of bias windows " +
                         std::to_string(windows));
      logits = reshape(add(reshape(logits, {groups / windows, windows, heads, tokens, tokens}), logit_bias),
                       {groups, heads, tokens, tokens});
    } else {
      logits = add(logits, logit_bias);
    }
  }
  const auto weights = softmax(logits, -1);
  if (probe) probe->push_back(weights);
  const auto mixed = matmul(weights, v);  // [G, heads, N, d]
  return proj(reshape(permute(mixed, {0, 2, 1, 3}), {groups, tokens, channels}));
}

template <typename T>
Tensor<T> residual(const Tensor<T>& x, const Tensor<T>& branch, double drop_prob, const ForwardContext<T>& ctx) {
  if (ctx.training && drop_prob > 0.0) {
    if (!ctx.rng) throw ConfigError("drop_path requires an rng in the forward context");
    return add(x, drop_path(branch, drop_prob, *ctx.rng));
  }
  return add(x, branch);
}

template <typename T>
TransformerBlock<T>::TransformerBlock(Index dim, int heads_, double mlp_ratio, double drop_path_, Rng& rng)
    : norm1(dim),
      qkv(dim, 3 * dim, false, rng),
      proj(dim, dim, true, rng),
      norm2(dim),
      mlp(dim, mlp_ratio, rng),
      heads(heads_),
      drop_path(drop_path_) {
  if (heads < 1 || dim % heads != 0)
    throw ConfigError("transformer block: dim " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
}

template <typename T>
Tensor<T> TransformerBlock<T>::forward(const Tensor<T>& x, const ForwardContext<T>& ctx,
                                       const Tensor<T>& logit_bias) const {
  auto h = residual(x, multi_head_attention(norm1(x), qkv, proj, heads, logit_bias, ctx.attention_probe), drop_path,
                    ctx);
  return residual(h, mlp(norm2(h)), drop_path, ctx);
}

template <typename T>
void TransformerBlock<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  norm1.collect(out, prefix + ".norm1");
  qkv.collect(out, prefix + ".attn.qkv");
  proj.collect(out, prefix + ".attn.proj");
  norm2.collect(out, prefix + ".norm2");
  mlp.collect(out, prefix + ".mlp");
}

#define CXR_INSTANTIATE_NN(T)                                                                            \
  template Tensor<T> trunc_normal_param<T>(Shape, Rng&, double);                                         \
  template Tensor<T> constant_param<T>(Shape, T);                                                        \
  template struct Linear<T>;                                                                             \
  template struct LayerNorm<T>;                                                                          \
  template struct Mlp<T>;                                                                                \
  template struct TransformerBlock<T>;                                                                   \
  template Tensor<T> multi_head_attention(const Tensor<T>&, const Linear<T>&, const Linear<T>&, int,     \
                                          const Tensor<T>&, std::vector<Tensor<T>>*);                    \
  template Tensor<T> residual(const Tensor<T>&, const Tensor<T>&, double, const ForwardContext<T>&);

CXR_INSTANTIATE_NN(float)
CXR_INSTANTIATE_NN(double)

#undef CXR_INSTANTIATE_NN

}  // namespace cxr
