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

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cxr/image.hpp"
#include "cxr/rng.hpp"
#include "cxr/tensor.hpp"

// Preprocessing chains.
//
// Training:   resize -> horizontal flip -> one of {rotation, horizontal
//             translation, vertical translation} -> random erasing -> normalize
// Evaluation: resize -> normalize
//
// Whole-image geometry is preserved: there is no crop stage, and no
// brightness or contrast stage, anywhere in the registry.
namespace cxr {

struct AugmentPolicy {
  static constexpr double kRotationCapDeg = 15.0;
  static constexpr double kTranslateCapFrac = 0.10;

  int target_size = 224;
  double flip_prob = 0.5;
  double affine_prob = 0.25;
  double max_rotation_deg = 10.0;
  double max_translate_frac = 0.05;
  double erase_prob = 0.25;
  std::pair<double, double> erase_area_range{0.02, 0.1};
  std::pair<double, double> erase_aspect_range{0.3, 3.3};
  float erase_fill = 0.0f;
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> std{0.229f, 0.224f, 0.225f};

  /// Throws ConfigError. Rotation above 15 degrees or translation above 10%
  /// of the side is rejected, as are probabilities outside [0, 1].
  void validate() const;
};

enum class Stage { Resize, HorizontalFlip, RandomAffine, RandomErasing, Normalize };

std::string_view stage_name(Stage stage);
/// Every stage either pipeline can run.
std::span<const Stage> stage_registry();

struct StageRecord {
  Stage stage;
  bool applied;
  std::string detail;
};
using StageTrace = std::vector<StageRecord>;

enum class AffineKind { Identity, Rotation, TranslateX, TranslateY };

struct AffineDraw {
  AffineKind kind = AffineKind::Identity;
  double angle_deg = 0.0;
  int shift = 0;  // pixels; +x moves content right, +y moves it down
};

struct EraseBox {
  int top = 0, left = 0, height = 0, width = 0;
};

AffineDraw draw_affine(const AugmentPolicy& policy, int height, int width, Rng& rng);
/// Bilinear rotation about the image center; samples from outside the
/// frame read as 0.
ImageTensor rotate(const ImageTensor& image, double angle_deg);
ImageTensor translate(const ImageTensor& image, int dx, int dy);
ImageTensor apply_affine(const ImageTensor& image, const AffineDraw& draw);

/// Area fraction and log-uniform aspect ratio drawn from the policy ranges;
/// a box must fit inside the image and keep its realized area fraction in
/// range. Gives up (no erase) after 10 failed placements.
std::optional<EraseBox> draw_erase_box(const AugmentPolicy& policy, int height, int width, Rng& rng);
ImageTensor erase(const ImageTensor& image, const EraseBox& box, float fill);

ImageTensor random_hflip(const ImageTensor& image, double p, Rng& rng, bool* flipped = nullptr);
ImageTensor random_affine(const ImageTensor& image, const AugmentPolicy& policy, Rng& rng,
                          AffineDraw* drawn = nullptr);
ImageTensor random_erasing(const ImageTensor& image, const AugmentPolicy& policy, Rng& rng,
                           std::optional<EraseBox>* drawn = nullptr);

ImageTensor to_three_channels(const ImageTensor& image);
/// (value - mean[c]) / std[c]. Grayscale input is replicated to three
/// channels first.
ImageTensor normalize(const ImageTensor& image, std::span<const float> mean, std::span<const float> std);
Tensor<float> to_tensor(const ImageTensor& image);

/// Training chain up to (not including) normalization; used by previews.
ImageTensor train_augment(const ImageTensor& image, const AugmentPolicy& policy, Rng& rng,
                          StageTrace* trace = nullptr);
/// Full training chain, output [3, target, target].
Tensor<float> train_pipeline(const ImageTensor& image, const AugmentPolicy& policy, Rng& rng,
                             StageTrace* trace = nullptr);
/// Deterministic evaluation chain, output [3, target, target].
Tensor<float> eval_pipeline(const ImageTensor& image, const AugmentPolicy& policy, StageTrace* trace = nullptr);

}  // namespace cxr
