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
#include <filesystem>
#include <span>
#include <vector>

#include "cxr/error.hpp"

namespace cxr {

/// Planar (channel, row, column) float image. Decoded pixels lie in [0, 1].
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> values;

  ImageTensor() = default;
  ImageTensor(int channels, int height, int width, float fill = 0.0f);

  float& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool operator==(const ImageTensor&) const = default;
};

enum class ImageErrorKind { UnsupportedFormat, MalformedHeader, TruncatedPayload, UnsupportedMaxval };

class ImageError : public DataError {
 public:
  ImageError(ImageErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}
  ImageErrorKind kind() const { return kind_; }

 private:
  ImageErrorKind kind_;
};

/// Binary PGM (P5) or PPM (P6) with maxval in [1, 255]. Values are divided
/// by maxval. Grayscale stays single-channel.
ImageTensor decode_image(std::span<const std::uint8_t> bytes);
ImageTensor read_image(const std::filesystem::path& path);

/// P5 for one channel, P6 for three. Values are clamped to [0, 1] and
/// rounded to 8 bits.
std::vector<std::uint8_t> encode_pnm(const ImageTensor& image);

/// Corner-aligned bilinear resampling: output corners sample input corners
/// exactly, src = dst * (in - 1) / (out - 1). A length-1 output samples the
/// input center.
ImageTensor resize_bilinear(const ImageTensor& image, int height, int width);

}  // namespace cxr
