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

#include "cxr/swin.hpp"

#include <string>

#include "cxr/error.hpp"

namespace cxr {

namespace {

std::string str(long long v) { return std::to_string(v); }

}  // namespace

SwinConfig SwinConfig::swin_base() { return SwinConfig{}; }

SwinConfig SwinConfig::toy() {
  SwinConfig c;
  c.img_size = 32;
  c.patch_size = 4;
  c.embed_dim = 8;
  c.depths = {1, 1};
  c.num_heads = {2, 2};
  c.window_size = 4;
  return c;
}

void SwinConfig::validate() const {
  if (patch_size < 1 || img_size < 1) throw ConfigError("swin: img_size and patch_size must be positive");
  if (img_size % patch_size != 0)
    throw ConfigError("swin: img_size " + str(img_size) + " not divisible by patch_size " + str(patch_size));
  if (embed_dim < 1) throw ConfigError("swin: embed_dim must be positive");
  if (depths.empty() || depths.size() != num_heads.size())
    throw ConfigError("swin: depths and num_heads must be non-empty and of equal length");
  if (window_size < 1) throw ConfigError("swin: window_size must be positive");
  if (mlp_ratio <= 0.0) throw ConfigError("swin: mlp_ratio must be positive");
  if (num_classes < 2) throw ConfigError("swin: num_classes must be >= 2");
  if (drop_path_rate < 0.0 || drop_path_rate >= 1.0) throw ConfigError("swin: drop_path_rate must be in [0, 1)");
  int res = img_size / patch_size;
  for (int s = 0; s < num_stages(); ++s) {
    if (depths[s] < 1) throw ConfigError("swin: stage " + str(s) + " has no blocks");
    const Index dim = static_cast<Index>(embed_dim) << s;
    if (num_heads[s] < 1 || dim % num_heads[s] != 0)
      throw ConfigError("swin: stage " + str(s) + " dim " + str(dim) + " not divisible by " + str(num_heads[s]) +
                        " heads");
    if (res % window_size != 0)
      throw ConfigError("swin: stage " + str(s) + " resolution " + str(res) + " not divisible by window " +
                        str(window_size));
    if (s + 1 < num_stages()) {
      if (res % 2 != 0) throw ConfigError("swin: stage " + str(s) + " resolution " + str(res) + " is odd");
      res /= 2;
    }
  }
}

int SwinConfig::stage_resolution(int stage) const { return (img_size / patch_size) >> stage; }

Index SwinConfig::stage_dim(int stage) const { return static_cast<Index>(embed_dim) << stage; }

int SwinConfig::stage_window(int stage) const {
  const int res = stage_resolution(stage);
  return res <= window_size ? res : window_size;
}

int SwinConfig::block_shift(int stage, int block) const {
  if (stage_resolution(stage) <= window_size || block % 2 == 0) return 0;
  return window_size / 2;
}

Index SwinConfig::parameter_count() const {
  validate();
  const Index c = embed_dim, p = patch_size;
  Index total = 3 * p * p * c + c + 2 * c;
  for (int s = 0; s < num_stages(); ++s) {
    const Index d = stage_dim(s);
    const Index h = num_heads[s];
    const Index w = stage_window(s);
    const auto hidden = static_cast<Index>(static_cast<double>(d) * mlp_ratio);
    const Index block = 4 * d + (3 * d * d + 3 * d) + (d * d + d) + (2 * w - 1) * (2 * w - 1) * h +
                        (2 * d * hidden + hidden + d);
    total += depths[s] * block;
    if (s + 1 < num_stages()) total += 8 * d + 8 * d * d;
  }
  const Index final_dim = stage_dim(num_stages() - 1);
  return total + 2 * final_dim + final_dim * num_classes + num_classes;
}

template <typename T>
Tensor<T> patch_tokens(const Tensor<T>& images, int patch) {
  if (images.rank() != 4 || images.dim(1) != 3)
    throw ShapeError("patch_tokens: expected [B, 3, H, W], got " + shape_str(images.shape()));
  const Index b = images.dim(0), h = images.dim(2), w = images.dim(3);
  if (patch < 1 || h % patch != 0 || w % patch != 0)
    throw ShapeError("patch_tokens: " + shape_str(images.shape()) + " not divisible into " + str(patch) +
                     "-pixel patches");
  const Index gh = h / patch, gw = w / patch;
  const auto grid = reshape(images, {b, 3, gh, patch, gw, patch});
  return reshape(permute(grid, {0, 2, 4, 1, 3, 5}), {b, gh * gw, 3 * patch * patch});
}

template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, int window) {
  if (x.rank() != 4) throw ShapeError("window_partition: expected [B, H, W, C], got " + shape_str(x.shape()));
  const Index b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (window < 1 || h % window != 0 || w % window != 0)
    throw ShapeError("window_partition: " + str(h) + "x" + str(w) + " not divisible by window " + str(window));
  const auto grid = reshape(x, {b, h / window, window, w / window, window, c});
  return reshape(permute(grid, {0, 1, 3, 2, 4, 5}), {b * (h / window) * (w / window), window, window, c});
}

template <typename T>
Tensor<T> window_reverse(const Tensor<T>& windows, int window, int height, int width) {
  if (windows.rank() != 4 || windows.dim(1) != window || windows.dim(2) != window)
    throw ShapeError("window_reverse: expected [G, " + str(window) + ", " + str(window) + ", C], got " +
                     shape_str(windows.shape()));
  if (window < 1 || height % window != 0 || width % window != 0)
    throw ShapeError("window_reverse: " + str(height) + "x" + str(width) + " not divisible by window " +
                     str(window));
  const Index per_image = static_cast<Index>(height / window) * (width / window);
  if (windows.dim(0) % per_image != 0)
    throw ShapeError("window_reverse: " + str(windows.dim(0)) + " windows do not tile " + str(height) + "x" +
                     str(width) + " images");
  const Index b = windows.dim(0) / per_image, c = windows.dim(3);
  const auto grid = reshape(windows, {b, height / window, width / window, window, window, c});
  return reshape(permute(grid, {0, 1, 3, 2, 4, 5}), {b, height, width, c});
}

template <typename T>
Tensor<T> shifted_window_mask(int height, int width, int window, int shift) {
  if (window < 1 || height % window != 0 || width % window != 0)
    throw ShapeError("shifted_window_mask: " + str(height) + "x" + str(width) + " not divisible by window " +
                     str(window));
  if (shift < 0 || shift >= window)
    throw ConfigError("shifted_window_mask: shift " + str(shift) + " outside [0, " + str(window) + ")");
  const Index n = static_cast<Index>(window) * window;
  const Index wins_y = height / window, wins_x = width / window;
  Tensor<T> mask({wins_y * wins_x, n, n}, T(0));
  if (shift == 0) return mask;

  // Regions of the shifted layout along one axis: [0, L-w), [L-w, L-s), [L-s, L).
  auto region = [&](int pos, int len) { return pos < len - window ? 0 : (pos < len - shift ? 1 : 2); };
  auto out = mask.mutable_data();
  for (Index wy = 0; wy < wins_y; ++wy)
    for (Index wx = 0; wx < wins_x; ++wx) {
      std::vector<int> ids(static_cast<std::size_t>(n));
      for (int i = 0; i < window; ++i)
        for (int j = 0; j < window; ++j)
          ids[i * window + j] = 3 * region(static_cast<int>(wy * window + i), height) +
                                region(static_cast<int>(wx * window + j), width);
      T* block = out.data() + (wy * wins_x + wx) * n * n;
      for (Index q = 0; q < n; ++q)
        for (Index k = 0; k < n; ++k)
          if (ids[q] != ids[k]) block[q * n + k] = T(-1e9);
    }
  return mask;
}

std::vector<Index> relative_position_index(int window) {
  const Index n = static_cast<Index>(window) * window;
  const Index span = 2 * window - 1;
  std::vector<Index> index(static_cast<std::size_t>(n * n));
  for (Index q = 0; q < n; ++q)
    for (Index k = 0; k < n; ++k) {
      const Index dy = q / window - k / window + window - 1;
      const Index dx = q % window - k % window + window - 1;
      index[q * n + k] = dy * span + dx;
    }
  return index;
}

template <typename T>
Tensor<T> window_attention(const Tensor<T>& tokens, const Linear<T>& qkv, const Linear<T>& proj,
                           const Tensor<T>& bias_table, int window, int heads, const Tensor<T>& mask,
                           std::vector<Tensor<T>>* probe) {
  const Index n = static_cast<Index>(window) * window;
  if (tokens.rank() != 3 || tokens.dim(1) != n)
    throw ShapeError("window_attention: expected [G, " + str(n) + ", C], got " + shape_str(tokens.shape()));
  const Index span = 2 * window - 1;
  if (bias_table.rank() != 2 || bias_table.dim(0) != span * span || bias_table.dim(1) != heads)
    throw ShapeError("window_attention: bias table " + shape_str(bias_table.shape()) + ", expected [" +
                     str(span * span) + ", " + str(heads) + "]");
  // [N*N, h] -> [h, N, N]
  auto bias = permute(reshape(index_select(bias_table, 0, relative_position_index(window)), {n, n, heads}), {2, 0, 1});
  if (mask.defined()) {
    if (mask.rank() != 3 || mask.dim(1) != n || mask.dim(2) != n)
      throw ShapeError("window_attention: mask " + shape_str(mask.shape()) + " does not match window");
    // Per-window mask replicated over heads: [nW, h, N, N].
    const Index wins = mask.dim(0);
    std::vector<T> rep(static_cast<std::size_t>(wins * heads * n * n));
    const auto& m = mask.data();
    for (Index g = 0; g < wins; ++g)
      for (Index h = 0; h < heads; ++h)
        std::copy(m.begin() + g * n * n, m.begin() + (g + 1) * n * n, rep.begin() + (g * heads + h) * n * n);
    bias = add(Tensor<T>({wins, heads, n, n}, std::move(rep), false), bias);
  }
  return multi_head_attention(tokens, qkv, proj, heads, bias, probe);
}

template <typename T>
Tensor<T> merge_neighbourhoods(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("patch_merging: expected [B, H, W, C], got " + shape_str(x.shape()));
  const Index b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw ShapeError("patch_merging: odd extent " + str(h) + "x" + str(w));
  // Channel blocks ordered (0,0), (1,0), (0,1), (1,1) by (row, col) offset.
  const auto grid = reshape(x, {b, h / 2, 2, w / 2, 2, c});
  return reshape(permute(grid, {0, 1, 3, 4, 2, 5}), {b, h / 2, w / 2, 4 * c});
}

template <typename T>
PatchMerging<T>::PatchMerging(Index dim, Rng& rng) : norm(4 * dim), reduction(4 * dim, 2 * dim, false, rng) {}

template <typename T>
Tensor<T> PatchMerging<T>::operator()(const Tensor<T>& x) const {
  return reduction(norm(merge_neighbourhoods(x)));
}

template <typename T>
void PatchMerging<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  norm.collect(out, prefix + ".norm");
  reduction.collect(out, prefix + ".reduction");
}

template <typename T>
SwinBlock<T>::SwinBlock(Index dim, int resolution_, int heads_, int window_, int shift_, double mlp_ratio,
                        double drop_path_, Rng& rng)
    : resolution(resolution_),
      window(window_),
      shift(shift_),
      heads(heads_),
      drop_path(drop_path_),
      norm1(dim),
      qkv(dim, 3 * dim, true, rng),
      proj(dim, dim, true, rng),
      bias_table(constant_param<T>({(2 * Index{window_} - 1) * (2 * Index{window_} - 1), heads_}, T(0))),
      norm2(dim),
      mlp(dim, mlp_ratio, rng) {
  if (heads < 1 || dim % heads != 0)
    throw ConfigError("swin block: dim " + str(dim) + " not divisible by " + str(heads) + " heads");
  if (shift > 0) mask = shifted_window_mask<T>(resolution, resolution, window, shift);
}

template <typename T>
Tensor<T> SwinBlock<T>::forward(const Tensor<T>& x, const ForwardContext<T>& ctx) const {
  const Index r = resolution;
  if (x.rank() != 3 || x.dim(1) != r * r)
    throw ShapeError("swin block: expected [B, " + str(r * r) + ", C], got " + shape_str(x.shape()));
  const Index b = x.dim(0), c = x.dim(2);
  auto h = reshape(norm1(x), {b, r, r, c});
  if (shift > 0) h = roll(roll(h, 1, -shift), 2, -shift);
  auto windows = reshape(window_partition(h, window), {-1, Index{window} * window, c});
  windows = window_attention(windows, qkv, proj, bias_table, window, heads, mask, ctx.attention_probe);
  h = window_reverse(reshape(windows, {-1, window, window, c}), window, resolution, resolution);
  if (shift > 0) h = roll(roll(h, 1, shift), 2, shift);
  auto y = residual(x, reshape(h, {b, r * r, c}), drop_path, ctx);
  return residual(y, mlp(norm2(y)), drop_path, ctx);
}

template <typename T>
void SwinBlock<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  norm1.collect(out, prefix + ".norm1");
  qkv.collect(out, prefix + ".attn.qkv");
  out.push_back({prefix + ".attn.relative_position_bias_table", bias_table});
  proj.collect(out, prefix + ".attn.proj");
  norm2.collect(out, prefix + ".norm2");
  mlp.collect(out, prefix + ".mlp");
}

template <typename T>
SwinModel<T>::SwinModel(const SwinConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const Index c = config_.embed_dim;
  patch_proj_ = Linear<T>(3 * Index{config_.patch_size} * config_.patch_size, c, true, rng);
  patch_norm_ = LayerNorm<T>(c);

  int total_blocks = 0;
  for (int d : config_.depths) total_blocks += d;
  int block_id = 0;
  for (int s = 0; s < config_.num_stages(); ++s) {
    std::vector<SwinBlock<T>> blocks;
    for (int i = 0; i < config_.depths[s]; ++i, ++block_id) {
      const double dp = total_blocks > 1 ? config_.drop_path_rate * block_id / (total_blocks - 1) : 0.0;
      blocks.emplace_back(config_.stage_dim(s), config_.stage_resolution(s), config_.num_heads[s],
                          config_.stage_window(s), config_.block_shift(s, i), config_.mlp_ratio, dp, rng);
    }
    stages_.push_back(std::move(blocks));
    if (s + 1 < config_.num_stages()) merges_.emplace_back(config_.stage_dim(s), rng);
  }
  const Index final_dim = config_.stage_dim(config_.num_stages() - 1);
  norm_ = LayerNorm<T>(final_dim);
  head_ = Linear<T>(final_dim, config_.num_classes, true, rng);
}

template <typename T>
Tensor<T> SwinModel<T>::forward(const Tensor<T>& images, const ForwardContext<T>& ctx) const {
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != config_.img_size ||
      images.dim(3) != config_.img_size)
    throw ShapeError("swin: expected [B, 3, " + str(config_.img_size) + ", " + str(config_.img_size) + "], got " +
                     shape_str(images.shape()));
  const Index b = images.dim(0);
  auto x = patch_norm_(patch_proj_(patch_tokens(images, config_.patch_size)));
  for (int s = 0; s < config_.num_stages(); ++s) {
    for (const auto& block : stages_[s]) x = block.forward(x, ctx);
    if (s + 1 < config_.num_stages()) {
      const Index r = config_.stage_resolution(s);
      const auto merged = merges_[s](reshape(x, {b, r, r, config_.stage_dim(s)}));
      x = reshape(merged, {b, (r / 2) * (r / 2), config_.stage_dim(s + 1)});
    }
  }
  return head_(mean_axis(norm_(x), 1));
}

template <typename T>
ParamList<T> SwinModel<T>::parameters() const {
  ParamList<T> out;
  patch_proj_.collect(out, "patch_embed.proj");
  patch_norm_.collect(out, "patch_embed.norm");
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const std::string stage = "layers." + std::to_string(s);
    for (std::size_t i = 0; i < stages_[s].size(); ++i) stages_[s][i].collect(out, stage + ".blocks." + std::to_string(i));
    if (s < merges_.size()) merges_[s].collect(out, stage + ".downsample");
  }
  norm_.collect(out, "norm");
  head_.collect(out, "head");
  return out;
}

#define CXR_INSTANTIATE_SWIN(T)                                                                              \
  template Tensor<T> patch_tokens(const Tensor<T>&, int);                                                    \
  template Tensor<T> window_partition(const Tensor<T>&, int);                                                \
  template Tensor<T> window_reverse(const Tensor<T>&, int, int, int);                                        \
  template Tensor<T> shifted_window_mask<T>(int, int, int, int);                                             \
  template Tensor<T> window_attention(const Tensor<T>&, const Linear<T>&, const Linear<T>&, const Tensor<T>&, \
                                      int, int, const Tensor<T>&, std::vector<Tensor<T>>*);                  \
  template Tensor<T> merge_neighbourhoods(const Tensor<T>&);                                                 \
  template struct PatchMerging<T>;                                                                           \
  template struct SwinBlock<T>;                                                                              \
  template class SwinModel<T>;

CXR_INSTANTIATE_SWIN(float)
CXR_INSTANTIATE_SWIN(double)

#undef CXR_INSTANTIATE_SWIN

}  // namespace cxr
