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

#include "cxr/augment.hpp"

#include <cmath>
#include <numbers>

#include "cxr/error.hpp"
#include "cxr/io.hpp"

namespace cxr {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void AugmentPolicy::validate() const {
  if (target_size < 1) throw ConfigError("augment: target_size must be >= 1");
  if (!is_probability(flip_prob) || !is_probability(affine_prob) || !is_probability(erase_prob))
    throw ConfigError("augment: probabilities must lie in [0, 1]");
  if (!(max_rotation_deg >= 0.0 && max_rotation_deg <= kRotationCapDeg))
    throw ConfigError("augment: max_rotation_deg must lie in [0, 15]");
  if (!(max_translate_frac >= 0.0 && max_translate_frac <= kTranslateCapFrac))
    throw ConfigError("augment: max_translate_frac must lie in [0, 0.10]");
  const auto [alo, ahi] = erase_area_range;
  if (!(alo > 0.0 && alo <= ahi && ahi < 1.0))
    throw ConfigError("augment: erase_area_range must satisfy 0 < lo <= hi < 1");
  const auto [rlo, rhi] = erase_aspect_range;
  if (!(rlo > 0.0 && rlo <= rhi)) throw ConfigError("augment: erase_aspect_range must be positive and ordered");
  for (float s : std)
    if (!(s > 0.0f)) throw ConfigError("augment: normalization std must be positive");
}

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::Resize: return "resize";
    case Stage::HorizontalFlip: return "horizontal_flip";
    case Stage::RandomAffine: return "random_affine";
    case Stage::RandomErasing: return "random_erasing";
    case Stage::Normalize: return "normalize";
  }
  return "unknown";
}

std::span<const Stage> stage_registry() {
  static constexpr std::array<Stage, 5> kStages{Stage::Resize, Stage::HorizontalFlip, Stage::RandomAffine,
                                                Stage::RandomErasing, Stage::Normalize};
  return kStages;
}

AffineDraw draw_affine(const AugmentPolicy& policy, int height, int width, Rng& rng) {
  AffineDraw draw;
  if (!rng.bernoulli(policy.affine_prob)) return draw;
  switch (rng.uniform_int(0, 2)) {
    case 0:
      draw.kind = AffineKind::Rotation;
      draw.angle_deg = rng.uniform(-policy.max_rotation_deg, policy.max_rotation_deg);
      break;
    case 1: {
      draw.kind = AffineKind::TranslateX;
      const auto limit = static_cast<std::int64_t>(std::floor(policy.max_translate_frac * width));
      draw.shift = static_cast<int>(rng.uniform_int(-limit, limit));
      break;
    }
    default: {
      draw.kind = AffineKind::TranslateY;
      const auto limit = static_cast<std::int64_t>(std::floor(policy.max_translate_frac * height));
      draw.shift = static_cast<int>(rng.uniform_int(-limit, limit));
      break;
    }
  }
  return draw;
}

ImageTensor rotate(const ImageTensor& image, double angle_deg) {
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cx = (image.width - 1) * 0.5, cy = (image.height - 1) * 0.5;
  ImageTensor out(image.channels, image.height, image.width);
  auto pixel = [&](int ch, int y, int x) -> double {
    if (x < 0 || y < 0 || x >= image.width || y >= image.height) return 0.0;
    return image.at(ch, y, x);
  };
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      // Inverse map: rotate the output coordinate by -theta.
      const double dx = x - cx, dy = y - cy;
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      for (int ch = 0; ch < image.channels; ++ch) {
        const double v = (pixel(ch, y0, x0) * (1 - fx) + pixel(ch, y0, x0 + 1) * fx) * (1 - fy) +
                         (pixel(ch, y0 + 1, x0) * (1 - fx) + pixel(ch, y0 + 1, x0 + 1) * fx) * fy;
        out.at(ch, y, x) = static_cast<float>(v);
      }
    }
  }
  return out;
}

ImageTensor translate(const ImageTensor& image, int dx, int dy) {
  ImageTensor out(image.channels, image.height, image.width, 0.0f);
  for (int ch = 0; ch < image.channels; ++ch)
    for (int y = 0; y < image.height; ++y) {
      const int sy = y - dy;
      if (sy < 0 || sy >= image.height) continue;
      for (int x = 0; x < image.width; ++x) {
        const int sx = x - dx;
        if (sx >= 0 && sx < image.width) out.at(ch, y, x) = image.at(ch, sy, sx);
      }
    }
  return out;
}

ImageTensor apply_affine(const ImageTensor& image, const AffineDraw& draw) {
  switch (draw.kind) {
    case AffineKind::Identity: return image;
    case AffineKind::Rotation: return rotate(image, draw.angle_deg);
    case AffineKind::TranslateX: return translate(image, draw.shift, 0);
    case AffineKind::TranslateY: return translate(image, 0, draw.shift);
  }
  return image;
}

std::optional<EraseBox> draw_erase_box(const AugmentPolicy& policy, int height, int width, Rng& rng) {
  if (!rng.bernoulli(policy.erase_prob)) return std::nullopt;
  const double total = static_cast<double>(height) * width;
  const auto [alo, ahi] = policy.erase_area_range;
  const double log_lo = std::log(policy.erase_aspect_range.first);
  const double log_hi = std::log(policy.erase_aspect_range.second);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double area = rng.uniform(alo, ahi) * total;
    const double ratio = std::exp(rng.uniform(log_lo, log_hi));
    const int h = static_cast<int>(std::lround(std::sqrt(area * ratio)));
    const int w = static_cast<int>(std::lround(std::sqrt(area / ratio)));
    if (h < 1 || w < 1 || h >= height || w >= width) continue;
    const double frac = static_cast<double>(h) * w / total;
    if (frac < alo || frac > ahi) continue;
    EraseBox box;
    box.height = h;
    box.width = w;
    box.top = static_cast<int>(rng.uniform_int(0, height - h));
    box.left = static_cast<int>(rng.uniform_int(0, width - w));
    return box;
  }
  return std::nullopt;
}

ImageTensor erase(const ImageTensor& image, const EraseBox& box, float fill) {
  ImageTensor out = image;
  for (int ch = 0; ch < out.channels; ++ch)
    for (int y = box.top; y < box.top + box.height; ++y)
      for (int x = box.left; x < box.left + box.width; ++x) out.at(ch, y, x) = fill;
  return out;
}

ImageTensor random_hflip(const ImageTensor& image, double p, Rng& rng, bool* flipped) {
  const bool flip = rng.bernoulli(p);
  if (flipped) *flipped = flip;
  if (!flip) return image;
  ImageTensor out(image.channels, image.height, image.width);
  for (int ch = 0; ch < image.channels; ++ch)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) out.at(ch, y, x) = image.at(ch, y, image.width - 1 - x);
  return out;
}

ImageTensor random_affine(const ImageTensor& image, const AugmentPolicy& policy, Rng& rng, AffineDraw* drawn) {
  const AffineDraw draw = draw_affine(policy, image.height, image.width, rng);
  if (drawn) *drawn = draw;
  return apply_affine(image, draw);
}

ImageTensor random_erasing(const ImageTensor& image, const AugmentPolicy& policy, Rng& rng,
                           std::optional<EraseBox>* drawn) {
  const auto box = draw_erase_box(policy, image.height, image.width, rng);
  if (drawn) *drawn = box;
  return box ? erase(image, *box, policy.erase_fill) : image;
}

ImageTensor to_three_channels(const ImageTensor& image) {
  if (image.channels == 3) return image;
  if (image.channels != 1) throw DataError("expected 1 or 3 channels, got " + std::to_string(image.channels));
  ImageTensor out(3, image.height, image.width);
  const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
  for (int ch = 0; ch < 3; ++ch)
    std::copy(image.values.begin(), image.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(ch * plane));
  return out;
}

ImageTensor normalize(const ImageTensor& image, std::span<const float> mean, std::span<const float> std) {
  ImageTensor out = to_three_channels(image);
  if (mean.size() != 3 || std.size() != 3) throw ConfigError("normalize: mean/std need three entries");
  const std::size_t plane = static_cast<std::size_t>(out.height) * out.width;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    if (!(std[ch] > 0.0f)) throw ConfigError("normalize: std must be positive");
    for (std::size_t i = 0; i < plane; ++i) {
      float& v = out.values[ch * plane + i];
      v = (v - mean[ch]) / std[ch];
    }
  }
  return out;
}

Tensor<float> to_tensor(const ImageTensor& image) {
  return Tensor<float>({image.channels, image.height, image.width}, image.values);
}

namespace {

std::string affine_detail(const AffineDraw& d) {
  switch (d.kind) {
    case AffineKind::Identity: return "none";
    case AffineKind::Rotation: return "rotation " + format_double(d.angle_deg) + "deg";
    case AffineKind::TranslateX: return "translate_x " + std::to_string(d.shift) + "px";
    case AffineKind::TranslateY: return "translate_y " + std::to_string(d.shift) + "px";
  }
  return "";
}

ImageTensor resize_stage(const ImageTensor& image, const AugmentPolicy& policy, StageTrace* trace) {
  ImageTensor out = resize_bilinear(image, policy.target_size, policy.target_size);
  if (trace)
    trace->push_back({Stage::Resize, true,
                      std::to_string(image.height) + "x" + std::to_string(image.width) + "->" +
                          std::to_string(policy.target_size) + "x" + std::to_string(policy.target_size)});
  return out;
}

Tensor<float> normalize_stage(const ImageTensor& image, const AugmentPolicy& policy, StageTrace* trace) {
  ImageTensor out = normalize(image, policy.mean, policy.std);
  if (trace) trace->push_back({Stage::Normalize, true, image.channels == 1 ? "replicated grayscale" : "rgb"});
  return to_tensor(out);
}

}  // namespace

ImageTensor train_augment(const ImageTensor& image, const AugmentPolicy& policy, Rng& rng, StageTrace* trace) {
  policy.validate();
  ImageTensor x = resize_stage(image, policy, trace);
  bool flipped = false;
  x = random_hflip(x, policy.flip_prob, rng, &flipped);
  if (trace) trace->push_back({Stage::HorizontalFlip, flipped, flipped ? "flipped" : "none"});
  AffineDraw draw;
  x = random_affine(x, policy, rng, &draw);
  if (trace) trace->push_back({Stage::RandomAffine, draw.kind != AffineKind::Identity, affine_detail(draw)});
  std::optional<EraseBox> box;
  x = random_erasing(x, policy, rng, &box);
  if (trace) {
    std::string detail = "none";
    if (box)
      detail = std::to_string(box->height) + "x" + std::to_string(box->width) + "@" + std::to_string(box->top) +
               "," + std::to_string(box->left);
    trace->push_back({Stage::RandomErasing, box.has_value(), detail});
  }
  return x;
}

Tensor<float> train_pipeline(const ImageTensor& image, const AugmentPolicy& policy, Rng& rng, StageTrace* trace) {
  return normalize_stage(train_augment(image, policy, rng, trace), policy, trace);
}

Tensor<float> eval_pipeline(const ImageTensor& image, const AugmentPolicy& policy, StageTrace* trace) {
  policy.validate();
  return normalize_stage(resize_stage(image, policy, trace), policy, trace);
}

}  // namespace cxr
