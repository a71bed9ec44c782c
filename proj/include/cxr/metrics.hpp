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
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cxr {

/// Class order used by every file, matrix and probability vector.
inline constexpr int kNumClasses = 3;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames{"COVID-19", "Normal", "Pneumonia"};

/// Throws DataError for a name outside kClassNames.
int class_index(std::string_view name);
std::string class_name(int index);

/// counts[i * k + j] = number of samples with label i predicted as j.
struct ConfusionMatrix {
  int k = kNumClasses;
  std::vector<std::int64_t> counts = std::vector<std::int64_t>(kNumClasses * kNumClasses, 0);

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes);

  std::int64_t& at(int label, int pred) { return counts[static_cast<std::size_t>(label * k + pred)]; }
  std::int64_t at(int label, int pred) const { return counts[static_cast<std::size_t>(label * k + pred)]; }
  std::int64_t total() const;
  std::int64_t trace() const;
};

/// Throws DataError on length mismatch or an index outside [0, k).
ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels, int k = kNumClasses);

struct ClassMetrics {
  std::int64_t support = 0;  // TP + FN
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> sensitivity;  // TP / (TP + FN); empty when support is 0
  std::optional<double> specificity;  // TN / (TN + FP); empty when TN + FP is 0
};

/// Aggregates skip classes whose metric is undefined; each skip adds a flag.
/// Macro is the unweighted mean over classes. Micro weights each class by
/// its support, so micro sensitivity is pooled TP over N and equals accuracy.
struct MetricReport {
  ConfusionMatrix matrix;
  std::int64_t total = 0;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  std::optional<double> macro_sensitivity, macro_specificity;
  std::optional<double> micro_sensitivity, micro_specificity;
  std::vector<std::string> flags;
};

/// Throws DataError when the matrix is empty or has negative counts.
MetricReport metric_report(const ConfusionMatrix& cm);

/// Undefined values are written as null.
nlohmann::json to_json(const MetricReport& report);

}  // namespace cxr
