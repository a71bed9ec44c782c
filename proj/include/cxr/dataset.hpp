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
#include <string>
#include <vector>

#include "cxr/image.hpp"
#include "cxr/rng.hpp"

namespace cxr {

struct ManifestRow {
  std::string path;  // relative to the manifest's directory; doubles as image_id
  int label = 0;
};

struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestRow> rows;

  std::filesystem::path resolve(const ManifestRow& row) const { return root / row.path; }
};

/// CSV with header `path,label`. Throws DataError naming the file and line
/// for a bad header, an unknown label, or a duplicate path.
Manifest read_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& root, const std::string& source);
std::string manifest_to_csv(const Manifest& manifest);

/// Throws DataError listing (up to 10) rows whose file is missing.
void require_files(const Manifest& manifest);

/// Mean intensity targeted for each class, in class-index order; samples
/// fall within ±kSyntheticJitter (plus 8-bit quantisation) of it.
inline constexpr double kSyntheticMeans[3] = {0.70, 0.30, 0.50};
inline constexpr double kSyntheticJitter = 0.03;

/// One grayscale square image of the given class:
///   COVID-19   several soft blobs
///   Normal     horizontal rib stripes
///   Pneumonia  one large soft blob
ImageTensor synthetic_image(int label, int size, Rng& rng);

/// Writes n images per class as P5 files under `dir` plus `dir/manifest.csv`.
/// Identical (n, seed, size) give identical bytes.
Manifest make_synthetic(const std::filesystem::path& dir, int per_class, std::uint64_t seed, int size = 64);

}  // namespace cxr
