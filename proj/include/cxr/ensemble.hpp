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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cxr/metrics.hpp"

namespace cxr {

using ClassProbs = std::array<double, kNumClasses>;

struct PredictionRecord {
  std::string image_id;
  ClassProbs probs{};
  int pred_label = 0;

  bool operator==(const PredictionRecord&) const = default;
};

/// Argmax; ties go to the lowest class index.
int classify(const ClassProbs& probs);

/// Weights must be positive and finite (ConfigError otherwise). They are
/// normalised first, so any positive rescaling gives bit-identical output,
/// and one member with weight 1 returns its input unchanged.
std::vector<double> normalize_weights(const std::vector<double>& weights);
ClassProbs weighted_average(const std::vector<ClassProbs>& members, const std::vector<double>& weights);

/// Combines members record by record, matched on image_id, in the first
/// member's order. Throws DataError listing up to 10 ids of the symmetric
/// difference when the id sets differ.
std::vector<PredictionRecord> ensemble_records(const std::vector<std::vector<PredictionRecord>>& members,
                                               const std::vector<double>& weights);

/// Parses "2,1" or "2:1".
std::vector<double> parse_weights(const std::string& text);
/// "2:1" style label with shortest number formatting.
std::string weights_label(const std::vector<double>& weights);

// CSV header: image_id,p_covid19,p_normal,p_pneumonia,pred_label
std::string predictions_to_csv(const std::vector<PredictionRecord>& records);
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);
/// Throws DataError on a bad header, duplicate id, unknown label, or a
/// probability row that does not sum to 1 within 1e-6.
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

/// image_id -> class index from a CSV with header (image_id|path),label.
std::map<std::string, int> read_truth(const std::filesystem::path& path);

/// Throws DataError if any record has no ground truth.
MetricReport evaluate_records(const std::vector<PredictionRecord>& records, const std::map<std::string, int>& truth);

struct SweepMember {
  std::string name;
  std::vector<PredictionRecord> records;
};

struct SweepRow {
  std::string models;   // "Swin" or "Swin, TNT"
  std::string weights;  // "/" for a single model, else "2:1"
  MetricReport report;
};

/// One solo row per member, then one row per weight vector of the grid.
std::vector<SweepRow> ensemble_sweep(const std::vector<SweepMember>& members,
                                     const std::vector<std::vector<double>>& grid,
                                     const std::map<std::string, int>& truth);

/// Models,Weights,Accuracy with accuracy to 4 decimals.
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

/// Accuracy rounded half-away-from-zero to 4 decimals, e.g. "0.9475".
std::string format_accuracy(double accuracy);

}  // namespace cxr
