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

#include <algorithm>
#include <cmath>
#include <string>

#include "cxr/augment.hpp"
#include "cxr/image.hpp"
#include "doctest.h"

using namespace cxr;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

ImageErrorKind decode_error_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_image(bytes);
  } catch (const ImageError& e) {
    return e.kind();
  }
  FAIL("expected ImageError");
  return ImageErrorKind::UnsupportedFormat;
}

ImageTensor pattern(int c, int h, int w, std::uint64_t seed, float lo = 0.1f, float hi = 1.0f) {
  Rng rng(seed);
  ImageTensor img(c, h, w);
  for (auto& v : img.values) v = static_cast<float>(rng.uniform(lo, hi));
  return img;
}

AugmentPolicy no_randomness(int size) {
  AugmentPolicy p;
  p.target_size = size;
  p.flip_prob = p.affine_prob = p.erase_prob = 0.0;
  return p;
}

}  // namespace

TEST_CASE("decode_image examples") {
  std::string p5 = "P5\n2 2\n255\n";
  p5 += std::string(4, '\xff');
  const auto white = decode_image(bytes_of(p5));
  CHECK(white.channels == 1);
  CHECK(white.height == 2);
  CHECK(white.width == 2);
  for (float v : white.values) CHECK(v == 1.0f);

  std::string p6 = "P6 1 1 255\n";
  p6 += std::string{'\x00', '\x80', '\xff'};
  const auto rgb = decode_image(bytes_of(p6));
  CHECK(rgb.channels == 3);
  CHECK(rgb.at(0, 0, 0) == 0.0f);
  CHECK(rgb.at(1, 0, 0) == doctest::Approx(128.0 / 255.0).epsilon(1e-7));
  CHECK(rgb.at(2, 0, 0) == 1.0f);

  std::string commented = "P5\n# a comment\n1 1\n# another\n255\n";
  commented += '\x33';
  CHECK(decode_image(bytes_of(commented)).values[0] == doctest::Approx(0x33 / 255.0));
}

TEST_CASE("decode_image error kinds are distinct") {
  CHECK(decode_error_kind(bytes_of("P7\n1 1\n255\n\x01")) == ImageErrorKind::UnsupportedFormat);
  CHECK(decode_error_kind(bytes_of("GIF89a")) == ImageErrorKind::UnsupportedFormat);
  CHECK(decode_error_kind(bytes_of("P5\n2 2\n255\n\x01\x02")) == ImageErrorKind::TruncatedPayload);
  CHECK(decode_error_kind(bytes_of("P5\n1 1\n65535\n\x01\x02")) == ImageErrorKind::UnsupportedMaxval);
  CHECK(decode_error_kind(bytes_of("P5\nx 1\n255\n\x01")) == ImageErrorKind::MalformedHeader);
  CHECK(decode_error_kind(bytes_of("P5\n1 1\n255")) == ImageErrorKind::MalformedHeader);
}

TEST_CASE("encode then decode preserves 8-bit images") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int c = trial % 2 ? 3 : 1;
    ImageTensor img(c, static_cast<int>(rng.uniform_int(1, 9)), static_cast<int>(rng.uniform_int(1, 9)));
    for (auto& v : img.values) v = static_cast<float>(rng.uniform_int(0, 255)) / 255.0f;
    CHECK(decode_image(encode_pnm(img)) == img);
  }
}

TEST_CASE("resize_bilinear examples") {
  const auto img = pattern(1, 5, 7, 1);
  CHECK(resize_bilinear(img, 5, 7) == img);

  ImageTensor flat(3, 4, 4, 0.3f);
  const auto big = resize_bilinear(flat, 9, 13);
  CHECK(big.height == 9);
  CHECK(big.width == 13);
  for (float v : big.values) CHECK(v == doctest::Approx(0.3f).epsilon(1e-6));

  ImageTensor row(1, 1, 2);
  row.values = {0.0f, 1.0f};
  const auto wide = resize_bilinear(row, 1, 3);
  CHECK(wide.values == std::vector<float>{0.0f, 0.5f, 1.0f});
}

TEST_CASE("random_hflip examples") {
  ImageTensor row(1, 1, 3);
  row.values = {1.0f, 2.0f, 3.0f};
  Rng rng(0);
  CHECK(random_hflip(row, 0.0, rng) == row);
  const auto flipped = random_hflip(row, 1.0, rng);
  CHECK(flipped.values == std::vector<float>{3.0f, 2.0f, 1.0f});
  CHECK(random_hflip(flipped, 1.0, rng) == row);
}

TEST_CASE("random_affine examples") {
  const auto img = pattern(1, 4, 4, 2);
  AugmentPolicy policy;
  policy.affine_prob = 0.0;
  Rng rng(5);
  CHECK(random_affine(img, policy, rng) == img);

  ImageTensor grid(1, 4, 4);
  for (int i = 0; i < 16; ++i) grid.values[static_cast<std::size_t>(i)] = static_cast<float>(i + 1);
  const auto shifted = apply_affine(grid, {AffineKind::TranslateX, 0.0, 2});
  for (int y = 0; y < 4; ++y) {
    CHECK(shifted.at(0, y, 0) == 0.0f);
    CHECK(shifted.at(0, y, 1) == 0.0f);
    CHECK(shifted.at(0, y, 2) == grid.at(0, y, 0));
    CHECK(shifted.at(0, y, 3) == grid.at(0, y, 1));
  }
  const auto down = apply_affine(grid, {AffineKind::TranslateY, 0.0, -1});
  CHECK(down.at(0, 0, 3) == grid.at(0, 1, 3));
  CHECK(down.at(0, 3, 0) == 0.0f);

  const auto still = apply_affine(img, {AffineKind::Rotation, 0.0, 0});
  for (std::size_t i = 0; i < img.values.size(); ++i) CHECK(std::abs(still.values[i] - img.values[i]) <= 1e-6);

  // A 90 degree turn of a square moves corners onto corners.
  const auto quarter = rotate(grid, 90.0);
  std::vector<float> a(quarter.values), b(grid.values);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-5));
}

TEST_CASE("affine draws respect the caps") {
  AugmentPolicy policy;
  policy.affine_prob = 1.0;
  policy.max_rotation_deg = 10.0;
  policy.max_translate_frac = 0.05;
  Rng rng(99);
  int kinds[4] = {0, 0, 0, 0};
  for (int i = 0; i < 10000; ++i) {
    const auto d = draw_affine(policy, 224, 200, rng);
    ++kinds[static_cast<int>(d.kind)];
    switch (d.kind) {
      case AffineKind::Rotation: CHECK(std::abs(d.angle_deg) <= 10.0); break;
      case AffineKind::TranslateX: CHECK(std::abs(d.shift) <= 0.05 * 200); break;
      case AffineKind::TranslateY: CHECK(std::abs(d.shift) <= 0.05 * 224); break;
      case AffineKind::Identity: break;
    }
  }
  CHECK(kinds[0] == 0);
  for (int k = 1; k < 4; ++k) CHECK(kinds[k] > 3000);

  policy.max_rotation_deg = 16.0;
  CHECK_THROWS_AS(policy.validate(), ConfigError);
  policy.max_rotation_deg = 15.0;
  policy.max_translate_frac = 0.11;
  CHECK_THROWS_AS(policy.validate(), ConfigError);
  policy.max_translate_frac = 0.1;
  policy.flip_prob = 1.5;
  CHECK_THROWS_AS(policy.validate(), ConfigError);
}

TEST_CASE("random_erasing examples") {
  AugmentPolicy policy;
  const auto img = pattern(1, 40, 50, 3, 0.2f, 1.0f);
  policy.erase_prob = 0.0;
  Rng rng(8);
  CHECK(random_erasing(img, policy, rng) == img);

  policy.erase_prob = 1.0;
  policy.erase_fill = 0.0f;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng r(seed);
    std::optional<EraseBox> box;
    const auto out = random_erasing(img, policy, r, &box);
    if (!box) continue;
    // Scan for the zero rectangle without trusting `box`.
    int top = out.height, left = out.width, bottom = -1, right = -1;
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        if (out.at(0, y, x) == 0.0f) {
          top = std::min(top, y);
          left = std::min(left, x);
          bottom = std::max(bottom, y);
          right = std::max(right, x);
        }
    REQUIRE(bottom >= 0);
    const double frac = static_cast<double>(bottom - top + 1) * (right - left + 1) / (40.0 * 50.0);
    CHECK(frac >= policy.erase_area_range.first);
    CHECK(frac <= policy.erase_area_range.second);
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        const bool inside = y >= top && y <= bottom && x >= left && x <= right;
        if (inside)
          CHECK(out.at(0, y, x) == 0.0f);
        else
          CHECK(out.at(0, y, x) == img.at(0, y, x));
      }
  }
}

TEST_CASE("normalize examples") {
  ImageTensor img(3, 1, 1);
  img.values = {0.485f, 0.456f, 0.406f};
  const AugmentPolicy defaults;
  const auto zero = normalize(img, defaults.mean, defaults.std);
  for (float v : zero.values) CHECK(v == 0.0f);

  const std::array<float, 3> m0{0, 0, 0}, s1{1, 1, 1};
  CHECK(normalize(img, m0, s1) == img);

  ImageTensor one(3, 1, 1, 1.0f);
  const std::array<float, 3> m{0.5f, 0.5f, 0.5f}, s{0.25f, 0.25f, 0.25f};
  for (float v : normalize(one, m, s).values) CHECK(v == 2.0f);

  ImageTensor gray(1, 2, 2, 0.5f);
  const auto rep = normalize(gray, m, s);
  CHECK(rep.channels == 3);
  for (float v : rep.values) CHECK(v == 0.0f);
}

TEST_CASE("train and eval pipelines") {
  const auto img = pattern(1, 48, 40, 4);
  AugmentPolicy policy;
  policy.target_size = 32;

  Rng r0(1);
  CHECK(std::ranges::equal(train_pipeline(img, no_randomness(32), r0).data(),
                           eval_pipeline(img, no_randomness(32)).data()));

  policy.flip_prob = policy.affine_prob = policy.erase_prob = 1.0;
  Rng a(123), b(123);
  const auto ta = train_pipeline(img, policy, a);
  const auto tb = train_pipeline(img, policy, b);
  CHECK(std::ranges::equal(ta.data(), tb.data()));
  CHECK(std::ranges::equal(eval_pipeline(img, policy).data(), eval_pipeline(img, policy).data()));

  AugmentPolicy swin;
  Rng r1(2);
  CHECK(train_pipeline(img, swin, r1).shape() == Shape{3, 224, 224});
  AugmentPolicy tnt;
  tnt.target_size = 384;
  CHECK(eval_pipeline(img, tnt).shape() == Shape{3, 384, 384});
}

TEST_CASE("stage traces follow the documented order") {
  const auto img = pattern(1, 20, 20, 6);
  AugmentPolicy policy;
  policy.target_size = 16;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    StageTrace trace;
    train_pipeline(img, policy, rng, &trace);
    REQUIRE(trace.size() == 5);
    CHECK(trace[0].stage == Stage::Resize);
    CHECK(trace[1].stage == Stage::HorizontalFlip);
    CHECK(trace[2].stage == Stage::RandomAffine);
    CHECK(trace[3].stage == Stage::RandomErasing);
    CHECK(trace[4].stage == Stage::Normalize);
  }
  StageTrace eval;
  eval_pipeline(img, policy, &eval);
  REQUIRE(eval.size() == 2);
  CHECK(eval[0].stage == Stage::Resize);
  CHECK(eval[1].stage == Stage::Normalize);

  for (Stage s : stage_registry()) {
    const std::string name(stage_name(s));
    CHECK(name.find("crop") == std::string::npos);
    CHECK(name.find("bright") == std::string::npos);
    CHECK(name.find("contrast") == std::string::npos);
  }
}
