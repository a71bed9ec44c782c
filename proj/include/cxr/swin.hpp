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

#include <cstdint>
#include <vector>

#include "cxr/nn.hpp"

namespace cxr {

struct SwinConfig {
  int img_size = 224;
  int patch_size = 4;
  int embed_dim = 128;
  std::vector<int> depths{2, 2, 18, 2};
  std::vector<int> num_heads{4, 8, 16, 32};
  int window_size = 7;
  double mlp_ratio = 4.0;
  int num_classes = 3;
  double drop_path_rate = 0.0;

  static SwinConfig swin_base();
  /// img 32, patch 4, dim 8, depths [1,1], heads [2,2], window 4.
  static SwinConfig toy();

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  int num_stages() const { return static_cast<int>(depths.size()); }
  int stage_resolution(int stage) const;
  Index stage_dim(int stage) const;
  /// A stage no larger than the window uses one window covering it and no shift.
  int stage_window(int stage) const;
  int block_shift(int stage, int block) const;

  /// Closed form:
  ///   embed   3p²C + C + 2C
  ///   block   4d + (3d² + 3d) + (d² + d) + (2w-1)²h + (2dh' + h' + d),  h' = ⌊d·ratio⌋
  ///   merge   8d + 8d²                       (all stages but the last)
  ///   tail    2D + DK + K                    (D = final dim)
  /// Agrees with the instantiated model for every valid config.
  Index parameter_count() const;
};

/// [B, 3, H, W] -> [B, (H/p)(W/p), 3p²]; each row is one patch flattened in (c, y, x) order.
template <typename T>
Tensor<T> patch_tokens(const Tensor<T>& images, int patch);

/// [B, H, W, C] -> [B·(H/w)(W/w), w, w, C], windows in row-major order per image.
template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, int window);

/// Inverse of window_partition.
template <typename T>
Tensor<T> window_reverse(const Tensor<T>& windows, int window, int height, int width);

/// Additive mask [nW, w², w²] for the cyclically shifted layout: 0 between
/// tokens that were adjacent before the shift, -1e9 otherwise. shift = 0 gives zeros.
template <typename T>
Tensor<T> shifted_window_mask(int height, int width, int window, int shift);

/// Table row for each (query, key) token pair of a w×w window, [w⁴] entries
/// indexing a (2w-1)² relative-offset table.
std::vector<Index> relative_position_index(int window);

/// Attention within windows, tokens [G, w², C]. `mask` is undefined or
/// [nW, w², w²] with G a multiple of nW.
template <typename T>
Tensor<T> window_attention(const Tensor<T>& tokens, const Linear<T>& qkv, const Linear<T>& proj,
                           const Tensor<T>& bias_table, int window, int heads, const Tensor<T>& mask = {},
                           std::vector<Tensor<T>>* probe = nullptr);

template <typename T>
struct PatchMerging {
  LayerNorm<T> norm;       // 4C
  Linear<T> reduction;     // 4C -> 2C, no bias

  PatchMerging() = default;
  PatchMerging(Index dim, Rng& rng);

  /// [B, H, W, C] -> [B, H/2, W/2, 2C]
  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

/// The [B, H/2, W/2, 4C] neighbourhood concatenation that precedes the norm.
template <typename T>
Tensor<T> merge_neighbourhoods(const Tensor<T>& x);

template <typename T>
struct SwinBlock {
  int resolution = 0;
  int window = 0;
  int shift = 0;
  int heads = 1;
  double drop_path = 0.0;
  LayerNorm<T> norm1;
  Linear<T> qkv;
  Linear<T> proj;
  Tensor<T> bias_table;  // [(2w-1)², heads]
  LayerNorm<T> norm2;
  Mlp<T> mlp;
  Tensor<T> mask;  // [nW, w², w²] when shifted

  SwinBlock() = default;
  SwinBlock(Index dim, int resolution, int heads, int window, int shift, double mlp_ratio, double drop_path,
            Rng& rng);

  /// x [B, resolution², dim]
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext<T>& ctx) const;
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
class SwinModel final : public Classifier<T> {
 public:
  SwinModel(const SwinConfig& config, std::uint64_t seed);

  Tensor<T> forward(const Tensor<T>& images, const ForwardContext<T>& ctx = {}) const override;
  ParamList<T> parameters() const override;
  int input_size() const override { return config_.img_size; }
  int num_classes() const override { return config_.num_classes; }

  const SwinConfig& config() const { return config_; }
  const SwinBlock<T>& block(int stage, int index) const { return stages_.at(stage).at(index); }

 private:
  SwinConfig config_;
  Linear<T> patch_proj_;
  LayerNorm<T> patch_norm_;
  std::vector<std::vector<SwinBlock<T>>> stages_;
  std::vector<PatchMerging<T>> merges_;
  LayerNorm<T> norm_;
  Linear<T> head_;
};

}  // namespace cxr
