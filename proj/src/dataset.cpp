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

#include "cxr/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "cxr/error.hpp"
#include "cxr/io.hpp"
#include "cxr/metrics.hpp"

namespace cxr {

namespace fs = std::filesystem;

Manifest parse_manifest(const std::string& text, const fs::path& root, const std::string& source) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"path", "label"})
    throw DataError(source + ": expected header path,label");
  Manifest m;
  m.root = root;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string at = source + ":" + std::to_string(i + 1);
    if (rows[i].size() != 2) throw DataError(at + ": expected 2 fields");
    const auto& path = rows[i][0];
    if (path.empty()) throw DataError(at + ": empty path");
    if (!seen.insert(path).second) throw DataError(at + ": duplicate path '" + path + "'");
    try {
      m.rows.push_back({path, class_index(rows[i][1])});
    } catch (const DataError& e) {
      throw DataError(at + ": " + e.what());
    }
  }
  return m;
}

Manifest read_manifest(const fs::path& path) {
  return parse_manifest(read_file_text(path), path.parent_path(), path.string());
}

std::string manifest_to_csv(const Manifest& manifest) {
  std::string out = "path,label\n";
  for (const auto& r : manifest.rows) out += csv_field(r.path) + "," + class_name(r.label) + "\n";
  return out;
}

void require_files(const Manifest& manifest) {
  std::vector<std::string> missing;
  for (const auto& r : manifest.rows)
    if (!fs::is_regular_file(manifest.resolve(r))) missing.push_back(r.path);
  if (missing.empty()) return;
  std::string list;
  for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
  throw DataError(std::to_string(missing.size()) + " manifest images missing under " + manifest.root.string() +
                  ": " + list);
}

ImageTensor synthetic_image(int label, int size, Rng& rng) {
  if (label < 0 || label >= kNumClasses) throw DataError("synthetic: label out of range");
  if (size < 8) throw ConfigError("synthetic: size must be >= 8");
  const double s = size;
  std::vector<double> field(static_cast<std::size_t>(size * size), 0.0);
  auto blob = [&](double cy, double cx, double radius) {
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        field[y * size + x] += std::exp(-d2 / (2 * radius * radius));
      }
  };
  switch (label) {
    case 0: {  // COVID-19
      const auto count = rng.uniform_int(4, 7);
      for (std::int64_t i = 0; i < count; ++i)
        blob(rng.uniform(0.15, 0.85) * s, rng.uniform(0.15, 0.85) * s, rng.uniform(0.05, 0.09) * s);
      break;
    }
    case 1: {  // Normal
      const double period = rng.uniform(0.12, 0.18) * s;
      const double phase = rng.uniform(0.0, 2 * std::numbers::pi);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) field[y * size + x] = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * y / period + phase);
      break;
    }
    default:  // Pneumonia
      blob(rng.uniform(0.35, 0.65) * s, rng.uniform(0.35, 0.65) * s, rng.uniform(0.18, 0.25) * s);
      break;
  }
  for (auto& v : field) v = std::min(v, 1.0) + rng.normal() * 0.02;

  // Zero-mean pattern, then shift to the class mean; amplitude keeps values inside [0, 1].
  double mean = 0.0;
  for (double v : field) mean += v;
  mean /= static_cast<double>(field.size());
  double spread = 1e-12;
  for (double v : field) spread = std::max(spread, std::abs(v - mean));
  const double target = kSyntheticMeans[label] + rng.uniform(-kSyntheticJitter, kSyntheticJitter);
  const double amplitude = 0.2 / spread;
  ImageTensor img(1, size, size);
  for (std::size_t i = 0; i < field.size(); ++i)
    img.values[i] = static_cast<float>(target + amplitude * (field[i] - mean));
  return img;
}

Manifest make_synthetic(const fs::path& dir, int per_class, std::uint64_t seed, int size) {
  if (per_class < 1) throw ConfigError("synthetic: --n must be >= 1");
  Manifest m;
  m.root = dir;
  static constexpr const char* kDirs[kNumClasses] = {"covid19", "normal", "pneumonia"};
  for (int i = 0; i < per_class; ++i)
    for (int label = 0; label < kNumClasses; ++label) {
      Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(label), static_cast<std::uint64_t>(i)});
      char name[64];
      std::snprintf(name, sizeof name, "%s/%s_%04d.pgm", kDirs[label], kDirs[label], i);
      const auto path = dir / name;
      fs::create_directories(path.parent_path());
      write_file_atomic(path, encode_pnm(synthetic_image(label, size, rng)));
      m.rows.push_back({name, label});
    }
  write_file_atomic(dir / "manifest.csv", manifest_to_csv(m));
  return m;
}

}  // namespace cxr
