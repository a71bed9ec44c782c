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
#include <utility>
#include <vector>

#include "cxr/nn.hpp"

namespace cxr {

struct TntConfig {
  int img_size = 384;
  int sentence_patch = 16;
  int word_patch = 4;
  int outer_dim = 384;
  int inner_dim = 24;
  int depth = 12;
  int outer_heads = 6;
  int inner_heads = 4;
  double mlp_ratio = 4.0;
  int num_classes = 3;
  double drop_path_rate = 0.0;

  static TntConfig tnt_small();
  /// img 16, sentence 8, word 4, outer 16, inner 8, depth 1.
  static TntConfig toy();

  void validate() const;

  Index num_sentences() const;
  Index num_words() const;

  /// Closed form, with Nw words of inner dim i, outer dim o, Ns sentences:
  ///   embed   (3w²i + i) + Nw·i + 2Nw·i + (Nw·i·o + o) + 2o + o + (Ns+1)·o
  ///   block   enc(i) + 2Nw·i + (Nw·i·o + o) + enc(o)
  ///   tail    2o + oK + K
  /// where enc(d) = 4d + 3d² + (d² + d) + (2dh' + h' + d), h' = ⌊d·ratio⌋.
  Index parameter_count() const;
};

template <typename T>
struct TntBlock {
  TransformerBlock<T> inner;
  LayerNorm<T> agg_norm;  // over the Nw·inner flattened words of a sentence
  Linear<T> agg_proj;     // Nw·inner -> outer
  TransformerBlock<T> outer;

  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
class TntModel final : public Classifier<T> {
 public:
  TntModel(const TntConfig& config, std::uint64_t seed);

  Tensor<T> forward(const Tensor<T>& images, const ForwardContext<T>& ctx = {}) const override;
  ParamList<T> parameters() const override;
  int input_size() const override { return config_.img_size; }
  int num_classes() const override { return config_.num_classes; }

  const TntConfig& config() const { return config_; }

  /// [B, 3, H, W] -> sentences [B, Ns, outer] and words [B·Ns, Nw, inner], both position-embedded
  /// (the sentence position of the class token is added by prepend_class_token).
  std::pair<Tensor<T>, Tensor<T>> sentence_word_split(const Tensor<T>& images) const;
  /// [B, Ns, outer] -> [B, Ns+1, outer] with the class token first and sentence positions added.
  Tensor<T> prepend_class_token(const Tensor<T>& sentences) const;
  Tensor<T> inner_block(int index, const Tensor<T>& words, const ForwardContext<T>& ctx = {}) const;
  /// Adds the projected words of sentence s to token s+1; the class token is untouched.
  Tensor<T> word_to_sentence_aggregate(int index, const Tensor<T>& words, const Tensor<T>& sentences) const;
  /// `mask`, if defined, is an additive [Ns+1, Ns+1] logit mask.
  Tensor<T> outer_block(int index, const Tensor<T>& sentences, const ForwardContext<T>& ctx = {},
                        const Tensor<T>& mask = {}) const;
  /// Final norm and head on the class token of [B, Ns+1, outer].
  Tensor<T> classify_tokens(const Tensor<T>& sentences) const;
  /// forward() with an additive logit mask on every outer block.
  Tensor<T> forward_masked(const Tensor<T>& images, const ForwardContext<T>& ctx, const Tensor<T>& outer_mask) const;

  const TntBlock<T>& block(int index) const { return blocks_.at(index); }
  const Tensor<T>& class_token() const { return cls_token_; }
  const Tensor<T>& sentence_pos() const { return sentence_pos_; }
  const Tensor<T>& word_pos() const { return word_pos_; }
  const LayerNorm<T>& final_norm() const { return norm_; }
  const Linear<T>& head() const { return head_; }

 private:
  TntConfig config_;
  Linear<T> word_proj_;      // 3w² -> inner
  Tensor<T> word_pos_;       // [Nw, inner]
  LayerNorm<T> sent_norm1_;  // Nw·inner
  Linear<T> sent_proj_;      // Nw·inner -> outer
  LayerNorm<T> sent_norm2_;  // outer
  Tensor<T> cls_token_;      // [1, 1, outer]
  Tensor<T> sentence_pos_;   // [Ns+1, outer]
  std::vector<TntBlock<T>> blocks_;
  LayerNorm<T> norm_;
  Linear<T> head_;
};

}  // namespace cxr
