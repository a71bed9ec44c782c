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

#include "cxr/tnt.hpp"

#include <string>

#include "cxr/error.hpp"

namespace cxr {

namespace {

std::string str(long long v) { return std::to_string(v); }

Index encoder_params(Index d, double ratio) {
  const auto hidden = static_cast<Index>(static_cast<double>(d) * ratio);
  return 4 * d + 3 * d * d + (d * d + d) + (2 * d * hidden + hidden + d);
}

}  // namespace

TntConfig TntConfig::tnt_small() { return TntConfig{}; }

TntConfig TntConfig::toy() {
  TntConfig c;
  c.img_size = 16;
  c.sentence_patch = 8;
  c.word_patch = 4;
  c.outer_dim = 16;
  c.inner_dim = 8;
  c.depth = 1;
  c.outer_heads = 2;
  c.inner_heads = 2;
  return c;
}

void TntConfig::validate() const {
  if (img_size < 1 || sentence_patch < 1 || word_patch < 1) throw ConfigError("tnt: sizes must be positive");
  if (img_size % sentence_patch != 0)
    throw ConfigError("tnt: img_size " + str(img_size) + " not divisible by sentence_patch " + str(sentence_patch));
  if (sentence_patch % word_patch != 0)
    throw ConfigError("tnt: sentence_patch " + str(sentence_patch) + " not divisible by word_patch " +
                      str(word_patch));
  if (outer_dim < 1 || inner_dim < 1 || depth < 1) throw ConfigError("tnt: dims and depth must be positive");
  if (outer_heads < 1 || outer_dim % outer_heads != 0)
    throw ConfigError("tnt: outer_dim " + str(outer_dim) + " not divisible by " + str(outer_heads) + " heads");
  if (inner_heads < 1 || inner_dim % inner_heads != 0)
    throw ConfigError("tnt: inner_dim " + str(inner_dim) + " not divisible by " + str(inner_heads) + " heads");
  if (mlp_ratio <= 0.0) throw ConfigError("tnt: mlp_ratio must be positive");
  if (num_classes < 2) throw ConfigError("tnt: num_classes must be >= 2");
  if (drop_path_rate < 0.0 || drop_path_rate >= 1.0) throw ConfigError("tnt: drop_path_rate must be in [0, 1)");
}

Index TntConfig::num_sentences() const {
  const Index g = img_size / sentence_patch;
  return g * g;
}

Index TntConfig::num_words() const {
  const Index g = sentence_patch / word_patch;
  return g * g;
}

Index TntConfig::parameter_count() const {
  validate();
  const Index i = inner_dim, o = outer_dim, nw = num_words(), ns = num_sentences();
  const Index w = word_patch;
  const Index embed = (3 * w * w * i + i) + nw * i + 2 * nw * i + (nw * i * o + o) + 2 * o + o + (ns + 1) * o;
  const Index block = encoder_params(i, mlp_ratio) + 2 * nw * i + (nw * i * o + o) + encoder_params(o, mlp_ratio);
  return embed + depth * block + 2 * o + o * num_classes + num_classes;
}

template <typename T>
void TntBlock<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  inner.collect(out, prefix + ".inner");
  agg_norm.collect(out, prefix + ".norm1_proj");
  agg_proj.collect(out, prefix + ".proj");
  outer.collect(out, prefix + ".outer");
}

template <typename T>
TntModel<T>::TntModel(const TntConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const Index i = config_.inner_dim, o = config_.outer_dim;
  const Index nw = config_.num_words(), ns = config_.num_sentences();
  const Index wp = config_.word_patch;
  word_proj_ = Linear<T>(3 * wp * wp, i, true, rng);
  word_pos_ = trunc_normal_param<T>({nw, i}, rng);
  sent_norm1_ = LayerNorm<T>(nw * i);
  sent_proj_ = Linear<T>(nw * i, o, true, rng);
  sent_norm2_ = LayerNorm<T>(o);
  cls_token_ = constant_param<T>({1, 1, o}, T(0));
  sentence_pos_ = trunc_normal_param<T>({ns + 1, o}, rng);
  for (int d = 0; d < config_.depth; ++d) {
    const double dp = config_.depth > 1 ? config_.drop_path_rate * d / (config_.depth - 1) : 0.0;
    TntBlock<T> block;
    block.inner = TransformerBlock<T>(i, config_.inner_heads, config_.mlp_ratio, dp, rng);
    block.agg_norm = LayerNorm<T>(nw * i);
    block.agg_proj = Linear<T>(nw * i, o, true, rng);
    block.outer = TransformerBlock<T>(o, config_.outer_heads, config_.mlp_ratio, dp, rng);
    blocks_.push_back(std::move(block));
  }
  norm_ = LayerNorm<T>(o);
  head_ = Linear<T>(o, config_.num_classes, true, rng);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> TntModel<T>::sentence_word_split(const Tensor<T>& images) const {
  const Index s = config_.img_size;
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != s || images.dim(3) != s)
    throw ShapeError("tnt: expected [B, 3, " + str(s) + ", " + str(s) + "], got " + shape_str(images.shape()));
  const Index b = images.dim(0);
  const Index wp = config_.word_patch;
  const Index g = s / config_.sentence_patch;      // sentences per side
  const Index m = config_.sentence_patch / wp;     // words per sentence side
  const Index ns = g * g, nw = m * m;
  // (B, c, gy, my, py, gx, mx, px) -> (B, gy, gx, my, mx, c, py, px)
  const auto grid = reshape(images, {b, 3, g, m, wp, g, m, wp});
  const auto pixels = reshape(permute(grid, {0, 2, 5, 3, 6, 1, 4, 7}), {b * ns, nw, 3 * wp * wp});
  auto words = add(word_proj_(pixels), word_pos_);
  auto sentences = sent_norm2_(sent_proj_(sent_norm1_(reshape(words, {b, ns, nw * config_.inner_dim}))));
  return {std::move(sentences), std::move(words)};
}

template <typename T>
Tensor<T> TntModel<T>::prepend_class_token(const Tensor<T>& sentences) const {
  const Index b = sentences.dim(0);
  const auto cls = index_select(cls_token_, 0, std::vector<Index>(static_cast<std::size_t>(b), 0));
  return add(concat<T>({cls, sentences}, 1), sentence_pos_);
}

template <typename T>
Tensor<T> TntModel<T>::inner_block(int index, const Tensor<T>& words, const ForwardContext<T>& ctx) const {
  return blocks_.at(index).inner.forward(words, ctx);
}

template <typename T>
Tensor<T> TntModel<T>::word_to_sentence_aggregate(int index, const Tensor<T>& words, const Tensor<T>& sentences) const {
  const auto& block = blocks_.at(index);
  const Index b = sentences.dim(0), n = sentences.dim(1) - 1;
  if (words.rank() != 3 || words.dim(0) != b * n)
    throw ShapeError("tnt aggregate: words " + shape_str(words.shape()) + " do not match sentences " +
                     shape_str(sentences.shape()));
  const auto flat = reshape(words, {b, n, words.dim(1) * words.dim(2)});
  const auto update = block.agg_proj(block.agg_norm(flat));
  const auto cls = slice(sentences, 1, 0, 1);
  return concat<T>({cls, add(slice(sentences, 1, 1, n), update)}, 1);
}

template <typename T>
Tensor<T> TntModel<T>::outer_block(int index, const Tensor<T>& sentences, const ForwardContext<T>& ctx,
                                   const Tensor<T>& mask) const {
  return blocks_.at(index).outer.forward(sentences, ctx, mask);
}

template <typename T>
Tensor<T> TntModel<T>::classify_tokens(const Tensor<T>& sentences) const {
  const auto cls = reshape(slice(sentences, 1, 0, 1), {sentences.dim(0), sentences.dim(2)});
  return head_(norm_(cls));
}

template <typename T>
Tensor<T> TntModel<T>::forward_masked(const Tensor<T>& images, const ForwardContext<T>& ctx,
                                      const Tensor<T>& outer_mask) const {
  auto [sentences, words] = sentence_word_split(images);
  auto tokens = prepend_class_token(sentences);
  for (int d = 0; d < config_.depth; ++d) {
    words = inner_block(d, words, ctx);
    tokens = word_to_sentence_aggregate(d, words, tokens);
    tokens = outer_block(d, tokens, ctx, outer_mask);
  }
  return classify_tokens(tokens);
}

template <typename T>
Tensor<T> TntModel<T>::forward(const Tensor<T>& images, const ForwardContext<T>& ctx) const {
  return forward_masked(images, ctx, Tensor<T>{});
}

template <typename T>
ParamList<T> TntModel<T>::parameters() const {
  ParamList<T> out;
  word_proj_.collect(out, "pixel_embed.proj");
  out.push_back({"pixel_pos", word_pos_});
  sent_norm1_.collect(out, "norm1_proj");
  sent_proj_.collect(out, "proj");
  sent_norm2_.collect(out, "norm2_proj");
  out.push_back({"cls_token", cls_token_});
  out.push_back({"patch_pos", sentence_pos_});
  for (std::size_t d = 0; d < blocks_.size(); ++d) blocks_[d].collect(out, "blocks." + std::to_string(d));
  norm_.collect(out, "norm");
  head_.collect(out, "head");
  return out;
}

template struct TntBlock<float>;
template struct TntBlock<double>;
template class TntModel<float>;
template class TntModel<double>;

}  // namespace cxr
