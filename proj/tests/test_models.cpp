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

#include <cmath>
#include <set>

#include "cxr/error.hpp"
#include "cxr/gradcheck.hpp"
#include "cxr/model.hpp"
#include "doctest.h"

using namespace cxr;
using T64 = Tensor<double>;
using T32 = Tensor<float>;

namespace {

template <typename T>
Tensor<T> random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<T> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>(std::move(shape), std::move(v));
}

// Moves every parameter away from its init so that zero biases and tables
// take part in the check.
template <typename T>
void jitter(const ParamList<T>& params, Rng& rng, double amount) {
  for (const auto& p : params) {
    Tensor<T> t = p.tensor;
    for (auto& v : t.mutable_data()) v += static_cast<T>(rng.uniform(-amount, amount));
  }
}

template <typename T>
std::vector<T> values(const Tensor<T>& t) {
  return {t.data().begin(), t.data().end()};
}

std::vector<std::pair<std::string, T64>> as_pairs(const ParamList<double>& params) {
  std::vector<std::pair<std::string, T64>> out;
  for (const auto& p : params) out.emplace_back(p.name, p.tensor);
  return out;
}

// Oracle for the shifted layout: the token at (r, c) came from image position
// ((r+s) mod H, (c+s) mod W). Two tokens of one window may attend to each
// other iff they lie on the same side of the wrap seam on both axes.
bool oracle_masked(int r1, int c1, int r2, int c2, int h, int w, int s) {
  if (s == 0) return false;
  auto wrapped = [s](int pos, int len) { return (pos + s) % len < s; };
  return wrapped(r1, h) != wrapped(r2, h) || wrapped(c1, w) != wrapped(c2, w);
}

template <typename T>
void check_rows_sum_to_one(const std::vector<Tensor<T>>& probe, double tol) {
  REQUIRE(!probe.empty());
  for (const auto& weights : probe) {
    const Index n = weights.dim(-1);
    const auto& d = weights.data();
    for (Index row = 0; row < weights.numel() / n; ++row) {
      double s = 0.0;
      for (Index k = 0; k < n; ++k) s += d[row * n + k];
      REQUIRE(std::abs(s - 1.0) < tol);
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- swin

TEST_CASE("swin config validation") {
  CHECK_NOTHROW(SwinConfig::toy().validate());
  CHECK_NOTHROW(SwinConfig::swin_base().validate());
  auto c = SwinConfig::toy();
  c.img_size = 30;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SwinConfig::toy();
  c.window_size = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SwinConfig::toy();
  c.num_heads = {3, 2};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SwinConfig::toy();
  c.num_classes = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("patch_tokens examples") {
  CHECK(patch_tokens(T32({1, 3, 224, 224}), 4).shape() == Shape{1, 3136, 48});

  Rng rng(1);
  const Linear<float> proj(48, 6, true, rng);
  CHECK(proj(patch_tokens(T32({1, 3, 8, 8}), 4)).shape() == Shape{1, 4, 6});

  const auto zero = proj(patch_tokens(T32({1, 3, 8, 8}), 4));
  for (float v : zero.data()) CHECK(v == 0.0f);

  // Row t is patch (t / 2, t % 2) flattened in (channel, y, x) order.
  const auto img = random_tensor<double>(rng, {1, 3, 8, 8});
  const auto rows = patch_tokens(img, 4);
  for (Index t = 0; t < 4; ++t)
    for (Index c = 0; c < 3; ++c)
      for (Index y = 0; y < 4; ++y)
        for (Index x = 0; x < 4; ++x)
          CHECK(rows.at({0, t, c * 16 + y * 4 + x}) == img.at({0, c, (t / 2) * 4 + y, (t % 2) * 4 + x}));

  CHECK_THROWS_AS(patch_tokens(T32({1, 3, 10, 10}), 4), ShapeError);
}

TEST_CASE("window_partition examples") {
  CHECK(window_partition(T32({1, 8, 8, 2}), 4).shape() == Shape{4, 4, 4, 2});

  Rng rng(2);
  const auto x = random_tensor<float>(rng, {1, 4, 4, 3});
  const auto one = window_partition(x, 4);
  CHECK(one.shape() == Shape{1, 4, 4, 3});
  CHECK(values(one) == values(x));
  CHECK(values(window_reverse(one, 4, 4, 4)) == values(x));

  // Window (1, 0) of an 8x8 grid starts at row 4, column 0.
  const auto big = random_tensor<float>(rng, {1, 8, 8, 1});
  const auto wins = window_partition(big, 4);
  CHECK(wins.at({2, 1, 3, 0}) == big.at({0, 5, 3, 0}));

  CHECK_THROWS_AS(window_partition(T32({1, 6, 8, 1}), 4), ShapeError);
  CHECK_THROWS_AS(window_reverse(T32({3, 4, 4, 1}), 4, 8, 8), ShapeError);
}

TEST_CASE("window_reverse only inverts the original window order") {
  Rng rng(3);
  const auto x = random_tensor<float>(rng, {1, 4, 8, 2});
  const auto wins = window_partition(x, 4);
  REQUIRE(wins.dim(0) == 2);
  const auto same = window_reverse(index_select(wins, 0, {0, 1}), 4, 4, 8);
  const auto swapped = window_reverse(index_select(wins, 0, {1, 0}), 4, 4, 8);
  CHECK(same.shape() == Shape{1, 4, 8, 2});
  CHECK(values(same) == values(x));
  CHECK(values(swapped) != values(x));
}

TEST_CASE("partition and reverse round-trip bit-exactly on random shapes") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = static_cast<int>(rng.uniform_int(1, 4));
    const Index b = rng.uniform_int(1, 3), c = rng.uniform_int(1, 4);
    const Index h = w * rng.uniform_int(1, 3), wd = w * rng.uniform_int(1, 3);
    const auto x = random_tensor<float>(rng, {b, h, wd, c});
    const auto back = window_reverse(window_partition(x, w), w, static_cast<int>(h), static_cast<int>(wd));
    REQUIRE(back.shape() == x.shape());
    REQUIRE(values(back) == values(x));
  }
}

TEST_CASE("shifted_window_mask examples") {
  const auto zero = shifted_window_mask<float>(8, 8, 4, 0);
  CHECK(zero.shape() == Shape{4, 16, 16});
  for (float v : zero.data()) CHECK(v == 0.0f);

  // A single window is still split into four sub-regions.
  const auto single = shifted_window_mask<float>(4, 4, 4, 2);
  CHECK(single.shape() == Shape{1, 16, 16});
  CHECK(single.at({0, 0, 1}) == 0.0f);     // (0,0) and (0,1): same region
  CHECK(single.at({0, 0, 2}) == -1e9f);    // (0,0) and (0,2): across the column seam
  CHECK(single.at({0, 0, 8}) == -1e9f);    // (0,0) and (2,0): across the row seam
  CHECK(single.at({0, 15, 10}) == 0.0f);   // (3,3) and (2,2)

  CHECK_THROWS_AS(shifted_window_mask<float>(8, 8, 4, 4), ConfigError);
  CHECK_THROWS_AS(shifted_window_mask<float>(8, 6, 4, 1), ShapeError);
}

TEST_CASE("shifted_window_mask matches the region oracle for every small layout") {
  std::size_t layouts = 0;
  for (int w = 1; w <= 12; ++w)
    for (int h = w; h <= 12; h += w)
      for (int wd = w; wd <= 12; wd += w)
        for (int s = 0; s < w; ++s) {
          const auto mask = shifted_window_mask<double>(h, wd, w, s);
          const int wins_x = wd / w;
          const auto& d = mask.data();
          const Index n = static_cast<Index>(w) * w;
          for (Index g = 0; g < mask.dim(0); ++g)
            for (Index q = 0; q < n; ++q)
              for (Index k = 0; k < n; ++k) {
                const int r1 = static_cast<int>(g / wins_x * w + q / w), c1 = static_cast<int>(g % wins_x * w + q % w);
                const int r2 = static_cast<int>(g / wins_x * w + k / w), c2 = static_cast<int>(g % wins_x * w + k % w);
                const double expected = oracle_masked(r1, c1, r2, c2, h, wd, s) ? -1e9 : 0.0;
                REQUIRE(d[(g * n + q) * n + k] == expected);
              }
          ++layouts;
        }
  CHECK(layouts > 100);
}

TEST_CASE("relative_position_index covers the offset table symmetrically") {
  const auto idx = relative_position_index(3);
  REQUIRE(idx.size() == 81);
  CHECK(idx[0] == 12);                 // zero offset is the table centre
  CHECK(idx[0 * 9 + 8] == 0);          // query (0,0), key (2,2): offset (-2,-2)
  CHECK(idx[8 * 9 + 0] == 24);         // offset (+2,+2)
  for (Index q = 0; q < 9; ++q) CHECK(idx[q * 9 + q] == 12);
}

TEST_CASE("window_attention examples") {
  Rng rng(5);
  SUBCASE("single token window returns proj(v(token))") {
    const Linear<double> qkv(4, 12, true, rng), proj(4, 4, true, rng);
    jitter<double>({{"b", qkv.bias}}, rng, 0.5);
    const T64 table({1, 2}, {0.3, -0.7});
    const auto tok = random_tensor<double>(rng, {3, 1, 4});
    std::vector<T64> probe;
    const auto out = window_attention(tok, qkv, proj, table, 1, 2, {}, &probe);
    const auto v = slice(qkv(tok), 2, 8, 4);
    const auto expected = proj(v);
    for (Index i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
    for (double p : probe.at(0).data()) CHECK(p == 1.0);
  }
  SUBCASE("equal tokens and zero bias attend uniformly") {
    const Linear<double> qkv(4, 12, true, rng), proj(4, 4, true, rng);
    const T64 table({9, 2}, 0.0);
    std::vector<double> row{0.2, -0.4, 0.9, 0.1};
    std::vector<double> data;
    for (int i = 0; i < 4; ++i) data.insert(data.end(), row.begin(), row.end());
    std::vector<T64> probe;
    window_attention(T64({1, 4, 4}, data), qkv, proj, table, 2, 2, {}, &probe);
    for (double p : probe.at(0).data()) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("a -1e9 mask entry suppresses that key") {
    const Linear<double> qkv(4, 12, true, rng), proj(4, 4, true, rng);
    const auto table = random_tensor<double>(rng, {9, 2});
    std::vector<double> m(16, 0.0);
    for (int q = 0; q < 4; ++q) m[q * 4 + 3] = -1e9;
    std::vector<T64> probe;
    window_attention(random_tensor<double>(rng, {2, 4, 4}), qkv, proj, table, 2, 2, T64({1, 4, 4}, m), &probe);
    const auto& w = probe.at(0);
    for (Index row = 0; row < w.numel() / 4; ++row) CHECK(w.data()[row * 4 + 3] < 1e-6);
  }
  SUBCASE("errors") {
    const Linear<double> qkv(6, 18, true, rng), proj(6, 6, true, rng);
    CHECK_THROWS_AS(window_attention(T64({1, 4, 6}), qkv, proj, T64({9, 4}), 2, 4), ShapeError);
  }
}

TEST_CASE("patch_merging examples") {
  Rng rng(6);
  const PatchMerging<float> merge1(1, rng);
  CHECK(merge1(T32({1, 56, 56, 1})).shape() == Shape{1, 28, 28, 2});
  CHECK(merge1(T32({1, 2, 2, 1})).shape() == Shape{1, 1, 1, 2});

  const auto flat = merge_neighbourhoods(T32({2, 4, 4, 3}, 0.5f));
  CHECK(flat.shape() == Shape{2, 2, 2, 12});
  for (float v : flat.data()) CHECK(v == 0.5f);

  // Channel block k holds pixel (2i + k%2, 2j + k/2).
  const auto x = random_tensor<double>(rng, {1, 4, 6, 2});
  const auto m = merge_neighbourhoods(x);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 3; ++j)
      for (Index k = 0; k < 4; ++k)
        for (Index c = 0; c < 2; ++c) CHECK(m.at({0, i, j, k * 2 + c}) == x.at({0, 2 * i + k % 2, 2 * j + k / 2, c}));

  CHECK_THROWS_AS(merge1(T32({1, 3, 4, 1})), ShapeError);
}

TEST_CASE("swin block shift follows the window convention") {
  const auto cfg = SwinConfig::swin_base();
  CHECK(cfg.block_shift(0, 0) == 0);
  CHECK(cfg.block_shift(0, 1) == 3);
  CHECK(cfg.block_shift(2, 17) == 3);
  CHECK(cfg.block_shift(3, 1) == 0);  // 7x7 stage: one window, nothing to shift
  CHECK(cfg.stage_window(3) == 7);
  auto toy = SwinConfig::toy();
  toy.depths = {2, 2};
  CHECK(toy.block_shift(0, 1) == 2);
  CHECK(toy.block_shift(1, 1) == 0);
}

TEST_CASE("swin forward on the toy config") {
  const SwinModel<float> model(SwinConfig::toy(), 7);
  Rng rng(8);
  const auto x = random_tensor<float>(rng, {2, 3, 32, 32});
  std::vector<T32> probe;
  ForwardContext<float> ctx;
  ctx.attention_probe = &probe;
  const auto logits = model.forward(x, ctx);
  CHECK(logits.shape() == Shape{2, 3});
  for (float v : logits.data()) CHECK(std::isfinite(v));
  const auto p = softmax(logits, -1);
  for (Index b = 0; b < 2; ++b) CHECK(p.at({b, 0}) + p.at({b, 1}) + p.at({b, 2}) == doctest::Approx(1.0).epsilon(1e-6));
  check_rows_sum_to_one(probe, 1e-6);
  CHECK_THROWS_AS(model.forward(T32({1, 3, 16, 16})), ShapeError);
}

TEST_CASE("swin attention rows sum to one with shifted blocks") {
  auto cfg = SwinConfig::toy();
  cfg.depths = {2, 1};
  SwinModel<float> model(cfg, 9);
  Rng rng(10);
  jitter(model.parameters(), rng, 0.5);
  std::vector<T32> probe;
  ForwardContext<float> ctx;
  ctx.attention_probe = &probe;
  model.forward(random_tensor<float>(rng, {2, 3, 32, 32}), ctx);
  CHECK(probe.size() == 3);
  check_rows_sum_to_one(probe, 1e-6);
}

TEST_CASE("swin forward is equivariant to batch permutation") {
  const SwinModel<float> model(SwinConfig::toy(), 11);
  Rng rng(12);
  const auto x = random_tensor<float>(rng, {3, 3, 32, 32});
  const std::vector<Index> perm{2, 0, 1};
  const auto a = model.forward(x);
  const auto b = model.forward(index_select(x, 0, perm));
  for (Index i = 0; i < 3; ++i)
    for (Index k = 0; k < 3; ++k) CHECK(b.at({i, k}) == doctest::Approx(a.at({perm[i], k})).epsilon(1e-6));
}

TEST_CASE("swin parameter count matches the closed form") {
  SUBCASE("instantiated configs") {
    std::vector<SwinConfig> configs{SwinConfig::toy()};
    auto c = SwinConfig::toy();
    c.depths = {2, 3};
    c.num_heads = {1, 4};
    c.mlp_ratio = 2.5;
    configs.push_back(c);
    c = SwinConfig::toy();
    c.img_size = 64;
    c.depths = {1, 2, 1};
    c.num_heads = {2, 2, 4};
    c.window_size = 2;
    c.num_classes = 5;
    configs.push_back(c);
    for (const auto& cfg : configs) {
      const SwinModel<float> model(cfg, 1);
      CHECK(total_elements(model.parameters()) == cfg.parameter_count());
    }
  }
  SUBCASE("base preset") {
    auto cfg = SwinConfig::swin_base();
    cfg.num_classes = 1000;
    CHECK(cfg.parameter_count() == 87768224);  // published figure for the 1000-class Swin-B
    cfg.num_classes = 3;
    CHECK(cfg.parameter_count() == 87768224 - 997 * 1025);
  }
}

TEST_CASE("swin parameters are finite and named uniquely") {
  const SwinModel<float> model(SwinConfig::toy(), 13);
  std::set<std::string> names;
  for (const auto& p : model.parameters()) {
    CHECK(names.insert(p.name).second);
    for (float v : p.tensor.data()) REQUIRE(std::isfinite(v));
  }
  CHECK(names.count("layers.0.blocks.0.attn.relative_position_bias_table") == 1);
  CHECK(names.count("layers.0.downsample.reduction.weight") == 1);
}

TEST_CASE("shifted swin block passes gradcheck") {
  Rng rng(14);
  const SwinBlock<double> block(8, 8, 2, 4, 2, 2.0, 0.0, rng);
  ParamList<double> params;
  block.collect(params, "block");
  jitter(params, rng, 0.3);
  const auto x = random_tensor<double>(rng, {1, 64, 8});
  CHECK(gradcheck([&](const T64& in) { return block.forward(in, {}); }, x) < 1e-4);
  const auto weights = random_tensor<double>(rng, {1, 64, 8});
  const auto report =
      gradcheck_params([&] { return sum(mul(block.forward(x, {}), weights)); }, as_pairs(params), 1e-6, 24);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("toy swin model passes gradcheck") {
  auto cfg = SwinConfig::toy();
  cfg.img_size = 16;
  cfg.window_size = 2;
  cfg.depths = {2, 2};
  const SwinModel<double> model(cfg, 15);
  Rng rng(16);
  jitter(model.parameters(), rng, 0.2);
  const auto x = random_tensor<double>(rng, {2, 3, 16, 16});
  const auto weights = random_tensor<double>(rng, {2, 3});
  const auto report = gradcheck_params([&] { return sum(mul(model.forward(x), weights)); },
                                       as_pairs(model.parameters()), 1e-6, 16);
  INFO(report.worst);
  CHECK(report.max_rel_error < 1e-4);
}

// ----------------------------------------------------------------- tnt

TEST_CASE("tnt config examples") {
  const auto small = TntConfig::tnt_small();
  CHECK(small.num_sentences() == 576);
  CHECK(small.num_words() == 16);
  const auto toy = TntConfig::toy();
  CHECK(toy.num_sentences() == 4);
  CHECK(toy.num_words() == 4);
  auto bad = toy;
  bad.sentence_patch = 6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = toy;
  bad.word_patch = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = toy;
  bad.inner_heads = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("tnt sentence_word_split shapes") {
  const TntModel<float> model(TntConfig::toy(), 1);
  const auto [sentences, words] = model.sentence_word_split(T32({2, 3, 16, 16}));
  CHECK(sentences.shape() == Shape{2, 4, 16});
  CHECK(words.shape() == Shape{8, 4, 8});
  CHECK(model.prepend_class_token(sentences).shape() == Shape{2, 5, 16});
  CHECK_THROWS_AS(model.sentence_word_split(T32({2, 3, 8, 8})), ShapeError);
}

TEST_CASE("tnt words are gathered from their own sentence patch") {
  auto cfg = TntConfig::toy();
  const TntModel<double> model(cfg, 2);
  Rng rng(3);
  auto img = random_tensor<double>(rng, {1, 3, 16, 16});
  const auto base = model.sentence_word_split(img).second;
  // Perturb one pixel of sentence 3 (bottom right), word 1 (top right of that sentence).
  img.mutable_data()[(0 * 16 + 9) * 16 + 14] += 1.0;
  const auto moved = model.sentence_word_split(img).second;
  for (Index s = 0; s < 4; ++s)
    for (Index w = 0; w < 4; ++w) {
      bool same = true;
      for (Index c = 0; c < 8; ++c) same = same && moved.at({s, w, c}) == base.at({s, w, c});
      CHECK(same == !(s == 3 && w == 1));
    }
}

TEST_CASE("tnt inner block with a single word") {
  Rng rng(4);
  const TransformerBlock<double> block(8, 2, 4.0, 0.0, rng);
  ParamList<double> params;
  block.collect(params, "inner");
  jitter(params, rng, 0.3);
  const auto x = random_tensor<double>(rng, {3, 1, 8});
  std::vector<T64> probe;
  ForwardContext<double> ctx;
  ctx.attention_probe = &probe;
  const auto out = block.forward(x, ctx);
  const auto v = slice(block.qkv(block.norm1(x)), 2, 16, 8);
  const auto h = add(x, block.proj(v));
  const auto expected = add(h, block.mlp(block.norm2(h)));
  for (Index i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
  for (double p : probe.at(0).data()) CHECK(p == 1.0);
}

TEST_CASE("tnt inner attention never mixes sentences") {
  const TntModel<double> model(TntConfig::toy(), 5);
  Rng rng(6);
  jitter(model.parameters(), rng, 0.3);
  std::vector<T64> probe;
  ForwardContext<double> ctx;
  ctx.attention_probe = &probe;
  for (Index i = 0; i < 8; ++i) {
    T64 words = random_tensor<double>(rng, {8, 4, 8});
    words.set_requires_grad(true);
    const auto out = model.inner_block(0, words, ctx);
    backward(sum(mul(slice(out, 0, i, 1), random_tensor<double>(rng, {1, 4, 8}))));
    const auto& g = words.grad();
    for (Index j = 0; j < 8; ++j) {
      bool zero = true;
      for (Index k = 0; k < 32; ++k) zero = zero && g[j * 32 + k] == 0.0;
      CHECK(zero == (j != i));
    }
  }
  check_rows_sum_to_one(probe, 1e-6);
}

TEST_CASE("tnt aggregation") {
  const TntModel<double> model(TntConfig::toy(), 7);
  Rng rng(8);
  const auto sentences = random_tensor<double>(rng, {2, 5, 16});
  SUBCASE("zero words leave sentences unchanged") {
    const auto out = model.word_to_sentence_aggregate(0, T64({8, 4, 8}), sentences);
    CHECK(out.shape() == Shape{2, 5, 16});
    CHECK(values(out) == values(sentences));
  }
  SUBCASE("only sentence tokens receive their own words") {
    const auto words = random_tensor<double>(rng, {8, 4, 8});
    const auto out = model.word_to_sentence_aggregate(0, words, sentences);
    for (Index b = 0; b < 2; ++b)
      for (Index c = 0; c < 16; ++c) CHECK(out.at({b, 0, c}) == sentences.at({b, 0, c}));
    T64 w = words.detach();
    w.mutable_data()[5 * 32] += 1.0;  // sample 1, sentence 1
    const auto moved = model.word_to_sentence_aggregate(0, w, sentences);
    for (Index b = 0; b < 2; ++b)
      for (Index t = 0; t < 5; ++t) {
        bool same = true;
        for (Index c = 0; c < 16; ++c) same = same && moved.at({b, t, c}) == out.at({b, t, c});
        CHECK(same == !(b == 1 && t == 2));
      }
  }
  SUBCASE("gradient reaches the words") {
    const auto words = random_tensor<double>(rng, {8, 4, 8});
    const auto f = [&](const T64& w) { return model.word_to_sentence_aggregate(0, w, sentences); };
    CHECK(gradcheck(f, words) < 1e-4);
    T64 w = words.detach();
    w.set_requires_grad(true);
    backward(sum(f(w)));
    double norm = 0.0;
    for (double g : w.grad()) norm += g * g;
    CHECK(norm > 0.0);
  }
}

TEST_CASE("tnt outer block") {
  Rng rng(9);
  const TransformerBlock<double> block(16, 2, 4.0, 0.0, rng);
  ParamList<double> params;
  block.collect(params, "outer");
  jitter(params, rng, 0.3);
  SUBCASE("single sentence plus token gives 2x2 attention") {
    std::vector<T64> probe;
    ForwardContext<double> ctx;
    ctx.attention_probe = &probe;
    block.forward(random_tensor<double>(rng, {3, 2, 16}), ctx);
    CHECK(probe.at(0).shape() == Shape{3, 2, 2, 2});
    check_rows_sum_to_one(probe, 1e-12);
  }
  SUBCASE("sentence permutation commutes with the block") {
    const auto x = random_tensor<double>(rng, {1, 5, 16});
    const std::vector<Index> perm{0, 3, 1, 4, 2};
    const auto a = block.forward(x, {});
    const auto b = block.forward(index_select(x, 1, perm), {});
    for (Index t = 0; t < 5; ++t)
      for (Index c = 0; c < 16; ++c) CHECK(b.at({0, t, c}) == doctest::Approx(a.at({0, perm[t], c})).epsilon(1e-12));
  }
  SUBCASE("gradcheck") {
    const auto x = random_tensor<double>(rng, {2, 5, 16});
    CHECK(gradcheck([&](const T64& in) { return block.forward(in, {}); }, x) < 1e-4);
  }
}

TEST_CASE("tnt forward on the toy config") {
  const TntModel<float> model(TntConfig::toy(), 10);
  Rng rng(11);
  const auto x = random_tensor<float>(rng, {2, 3, 16, 16});
  std::vector<T32> probe;
  ForwardContext<float> ctx;
  ctx.attention_probe = &probe;
  const auto logits = model.forward(x, ctx);
  CHECK(logits.shape() == Shape{2, 3});
  const auto p = softmax(logits, -1);
  for (Index b = 0; b < 2; ++b) CHECK(p.at({b, 0}) + p.at({b, 1}) + p.at({b, 2}) == doctest::Approx(1.0).epsilon(1e-6));
  check_rows_sum_to_one(probe, 1e-6);

  const TntModel<float> twin(TntConfig::toy(), 10);
  CHECK(values(twin.forward(x)) == values(logits));
  const TntModel<float> other(TntConfig::toy(), 99);
  CHECK(values(other.forward(x)) != values(logits));
}

TEST_CASE("tnt class token path with sentences masked out") {
  auto cfg = TntConfig::toy();
  cfg.img_size = 8;  // one sentence
  cfg.depth = 2;
  const TntModel<double> model(cfg, 12);
  Rng rng(13);
  jitter(model.parameters(), rng, 0.3);
  const auto x = random_tensor<double>(rng, {2, 3, 8, 8});
  const T64 mask({2, 2}, {0.0, -1e9, 0.0, 0.0});
  const auto logits = model.forward_masked(x, {}, mask);

  // Brute force: with the sentence hidden, the class token only ever attends to itself.
  T64 cls = add(reshape(model.class_token(), {1, 1, 16}), slice(model.sentence_pos(), 0, 0, 1));
  for (int d = 0; d < cfg.depth; ++d) {
    const auto& blk = model.block(d).outer;
    const auto v = slice(blk.qkv(blk.norm1(cls)), 2, 32, 16);
    cls = add(cls, blk.proj(v));
    cls = add(cls, blk.mlp(blk.norm2(cls)));
  }
  const auto expected = model.head()(model.final_norm()(reshape(cls, {1, 16})));
  for (Index b = 0; b < 2; ++b)
    for (Index k = 0; k < 3; ++k) CHECK(logits.at({b, k}) == doctest::Approx(expected.at({0, k})).epsilon(1e-12));
  // Without the mask the image reaches the logits.
  const auto open = model.forward(x);
  CHECK(std::abs(open.at({0, 0}) - expected.at({0, 0})) > 1e-9);
}

TEST_CASE("tnt parameter count matches the closed form") {
  std::vector<TntConfig> configs{TntConfig::toy()};
  auto c = TntConfig::toy();
  c.depth = 3;
  c.mlp_ratio = 3.0;
  c.num_classes = 4;
  configs.push_back(c);
  c = TntConfig::toy();
  c.img_size = 24;
  c.sentence_patch = 12;
  c.word_patch = 3;
  c.inner_heads = 4;
  configs.push_back(c);
  configs.push_back(TntConfig::tnt_small());
  for (const auto& cfg : configs) {
    const TntModel<float> model(cfg, 1);
    CHECK(total_elements(model.parameters()) == cfg.parameter_count());
  }
}

TEST_CASE("toy tnt model passes gradcheck") {
  const TntModel<double> model(TntConfig::toy(), 14);
  Rng rng(15);
  jitter(model.parameters(), rng, 0.2);
  const auto x = random_tensor<double>(rng, {2, 3, 16, 16});
  const auto weights = random_tensor<double>(rng, {2, 3});
  const auto report = gradcheck_params([&] { return sum(mul(model.forward(x), weights)); },
                                       as_pairs(model.parameters()), 1e-6, 16);
  INFO(report.worst);
  CHECK(report.max_rel_error < 1e-4);
}

// --------------------------------------------------------------- factory

TEST_CASE("model spec presets and json") {
  for (const char* name : {"swin_toy", "swin_b", "tnt_toy", "tnt_s"}) {
    const auto spec = ModelSpec::preset(name);
    const auto back = ModelSpec::from_json(spec.to_json());
    CHECK(back.to_json() == spec.to_json());
    CHECK(back.parameter_count() == spec.parameter_count());
  }
  CHECK(ModelSpec::preset("tnt_s").input_size() == 384);
  CHECK(ModelSpec::preset("swin_b").input_size() == 224);
  const auto spec = ModelSpec::from_json(nlohmann::json{{"preset", "swin_toy"}, {"depths", {2, 1}}});
  CHECK(spec.swin.depths == std::vector<int>{2, 1});
  CHECK_THROWS_AS(ModelSpec::preset("vit"), ConfigError);
  CHECK_THROWS_AS(ModelSpec::from_json(nlohmann::json{{"preset", "swin_toy"}, {"depth", 2}}), ConfigError);
  CHECK_THROWS_AS(ModelSpec::from_json(nlohmann::json{{"preset", "swin_toy"}, {"window_size", 3}}), ConfigError);
  CHECK_THROWS_AS(ModelSpec::from_json(nlohmann::json{{"img_size", 32}}), ConfigError);

  const auto model = make_classifier<float>(ModelSpec::preset("tnt_toy"), 3);
  CHECK(model->input_size() == 16);
  CHECK(model->forward(T32({1, 3, 16, 16})).shape() == Shape{1, 3});
}
