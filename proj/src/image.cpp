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

#include "cxr/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "cxr/io.hpp"

namespace cxr {

ImageTensor::ImageTensor(int c, int h, int w, float fill)
    : height(h), width(w), channels(c), values(static_cast<std::size_t>(c) * h * w, fill) {}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Skips whitespace and '#' comments, then reads a decimal field.
  long number(const char* what) {
    skip_space();
    std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) throw ImageError(ImageErrorKind::MalformedHeader, std::string("pnm: ") + what + " too large");
      ++pos_;
    }
    if (pos_ == start) throw ImageError(ImageErrorKind::MalformedHeader, std::string("pnm: missing ") + what);
    return value;
  }

  // Exactly one whitespace byte separates the header from the payload.
  std::size_t payload_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw ImageError(ImageErrorKind::MalformedHeader, "pnm: no whitespace before payload");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

ImageTensor decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P')
    throw ImageError(ImageErrorKind::UnsupportedFormat, "pnm: not a PNM stream");
  int channels = 0;
  if (bytes[1] == '5') {
    channels = 1;
  } else if (bytes[1] == '6') {
    channels = 3;
  } else {
    throw ImageError(ImageErrorKind::UnsupportedFormat,
                     std::string("pnm: unsupported format P") + static_cast<char>(bytes[1]));
  }
  HeaderReader header(bytes);
  const long width = header.number("width");
  const long height = header.number("height");
  const long maxval = header.number("maxval");
  if (width < 1 || height < 1) throw ImageError(ImageErrorKind::MalformedHeader, "pnm: zero image extent");
  if (maxval < 1) throw ImageError(ImageErrorKind::MalformedHeader, "pnm: maxval must be positive");
  if (maxval > 255)
    throw ImageError(ImageErrorKind::UnsupportedMaxval,
                     "pnm: maxval " + std::to_string(maxval) + " is not 8-bit");
  const std::size_t offset = header.payload_offset();
  const std::size_t needed = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() < offset + needed)
    throw ImageError(ImageErrorKind::TruncatedPayload,
                     "pnm: payload has " + std::to_string(bytes.size() - std::min(bytes.size(), offset)) +
                         " bytes, expected " + std::to_string(needed));

  ImageTensor img(channels, static_cast<int>(height), static_cast<int>(width));
  const auto scale = static_cast<float>(maxval);
  const auto* px = bytes.data() + offset;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < channels; ++c) {
        const auto raw = std::min<long>(*px++, maxval);
        img.at(c, y, x) = static_cast<float>(raw) / scale;
      }
  return img;
}

ImageTensor read_image(const std::filesystem::path& path) {
  return decode_image(read_file_bytes(path));
}

std::vector<std::uint8_t> encode_pnm(const ImageTensor& image) {
  if (image.channels != 1 && image.channels != 3)
    throw DataError("pnm: cannot encode " + std::to_string(image.channels) + " channels");
  const std::string header = std::string(image.channels == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.values.size());
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
      }
  return out;
}

ImageTensor resize_bilinear(const ImageTensor& image, int height, int width) {
  if (height < 1 || width < 1) throw ConfigError("resize: target extent must be >= 1");
  if (height == image.height && width == image.width) return image;
  ImageTensor out(image.channels, height, width);
  auto source = [](int dst, int out_len, int in_len) {
    if (out_len == 1) return (in_len - 1) * 0.5;
    return static_cast<double>(dst) * (in_len - 1) / (out_len - 1);
  };
  for (int y = 0; y < height; ++y) {
    const double sy = source(y, height, image.height);
    const int y0 = std::min(static_cast<int>(std::floor(sy)), image.height - 1);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = source(x, width, image.width);
      const int x0 = std::min(static_cast<int>(std::floor(sx)), image.width - 1);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double fx = sx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double top = image.at(c, y0, x0) * (1 - fx) + image.at(c, y0, x1) * fx;
        const double bottom = image.at(c, y1, x0) * (1 - fx) + image.at(c, y1, x1) * fx;
        out.at(c, y, x) = static_cast<float>(std::clamp(top * (1 - fy) + bottom * fy, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace cxr
