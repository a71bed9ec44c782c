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

#include "cxr/ensemble.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "cxr/error.hpp"
#include "cxr/io.hpp"

namespace cxr {

namespace {

const std::vector<std::string> kPredictionHeader{"image_id", "p_covid19", "p_normal", "p_pneumonia", "pred_label"};

double parse_number(const std::string& field, const std::string& where) {
  double value = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value))
    throw DataError(where + ": '" + field + "' is not a finite number");
  return value;
}

std::string id_list(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < 10; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > 10) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace

int classify(const ClassProbs& probs) {
  int best = 0;
  for (int k = 1; k < kNumClasses; ++k)
    if (probs[k] > probs[best]) best = k;
  return best;
}

std::vector<double> normalize_weights(const std::vector<double>& weights) {
  if (weights.empty()) throw ConfigError("ensemble: at least one weight is required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("ensemble: weights must be positive and finite");
    total += w;
  }
  std::vector<double> out;
  for (double w : weights) out.push_back(w / total);
  return out;
}

ClassProbs weighted_average(const std::vector<ClassProbs>& members, const std::vector<double>& weights) {
  if (members.size() != weights.size())
    throw ConfigError("ensemble: " + std::to_string(weights.size()) + " weights for " +
                      std::to_string(members.size()) + " members");
  const auto w = normalize_weights(weights);
  ClassProbs out{};
  for (std::size_t m = 0; m < members.size(); ++m)
    for (int k = 0; k < kNumClasses; ++k) out[k] += w[m] * members[m][k];
  return out;
}

std::vector<PredictionRecord> ensemble_records(const std::vector<std::vector<PredictionRecord>>& members,
                                               const std::vector<double>& weights) {
  if (members.empty()) throw ConfigError("ensemble: at least one member is required");
  if (members.size() != weights.size())
    throw ConfigError("ensemble: " + std::to_string(weights.size()) + " weights for " +
                      std::to_string(members.size()) + " members");
  normalize_weights(weights);

  std::vector<std::unordered_map<std::string, const PredictionRecord*>> index(members.size());
  for (std::size_t m = 0; m < members.size(); ++m)
    for (const auto& r : members[m])
      if (!index[m].emplace(r.image_id, &r).second)
        throw DataError("ensemble: member " + std::to_string(m + 1) + " lists '" + r.image_id + "' twice");
  for (std::size_t m = 1; m < members.size(); ++m) {
    std::vector<std::string> diff;
    for (const auto& r : members[0])
      if (!index[m].count(r.image_id)) diff.push_back(r.image_id);
    for (const auto& r : members[m])
      if (!index[0].count(r.image_id)) diff.push_back(r.image_id);
    if (!diff.empty())
      throw DataError("ensemble: member " + std::to_string(m + 1) + " covers different images than member 1; " +
                      std::to_string(diff.size()) + " ids differ: " + id_list(diff));
  }

  std::vector<PredictionRecord> out;
  out.reserve(members[0].size());
  std::vector<ClassProbs> probs(members.size());
  for (const auto& r : members[0]) {
    for (std::size_t m = 0; m < members.size(); ++m) probs[m] = index[m].at(r.image_id)->probs;
    PredictionRecord rec{r.image_id, weighted_average(probs, weights), 0};
    rec.pred_label = classify(rec.probs);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<double> parse_weights(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find_first_of(",:", start);
    if (end == std::string::npos) end = text.size();
    const std::string field = text.substr(start, end - start);
    double w = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), w);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
      throw ConfigError("weights: '" + field + "' is not a number in '" + text + "'");
    out.push_back(w);
    start = end + 1;
  }
  normalize_weights(out);
  return out;
}

std::string weights_label(const std::vector<double>& weights) {
  std::string out;
  for (std::size_t i = 0; i < weights.size(); ++i) out += (i ? ":" : "") + format_double(weights[i]);
  return out;
}

std::string predictions_to_csv(const std::vector<PredictionRecord>& records) {
  std::string out = "image_id,p_covid19,p_normal,p_pneumonia,pred_label\n";
  for (const auto& r : records) {
    out += csv_field(r.image_id);
    for (double p : r.probs) out += "," + format_double(p);
    out += "," + class_name(r.pred_label) + "\n";
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records) {
  write_file_atomic(path, predictions_to_csv(records));
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  const auto rows = parse_csv(read_file_text(path));
  const std::string where = path.string();
  if (rows.empty() || rows[0] != kPredictionHeader)
    throw DataError(where + ": expected header image_id,p_covid19,p_normal,p_pneumonia,pred_label");
  std::vector<PredictionRecord> out;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::string at = where + ":" + std::to_string(i + 1);
    if (row.size() != kPredictionHeader.size()) throw DataError(at + ": expected 5 fields");
    PredictionRecord r;
    r.image_id = row[0];
    if (!seen.insert(r.image_id).second) throw DataError(at + ": duplicate image_id '" + r.image_id + "'");
    double total = 0.0;
    for (int k = 0; k < kNumClasses; ++k) {
      r.probs[k] = parse_number(row[1 + k], at);
      if (r.probs[k] < 0.0 || r.probs[k] > 1.0) throw DataError(at + ": probability outside [0, 1]");
      total += r.probs[k];
    }
    if (std::abs(total - 1.0) > 1e-6) throw DataError(at + ": probabilities sum to " + format_double(total));
    r.pred_label = class_index(row[4]);
    out.push_back(std::move(r));
  }
  return out;
}

std::map<std::string, int> read_truth(const std::filesystem::path& path) {
  const auto rows = parse_csv(read_file_text(path));
  const std::string where = path.string();
  if (rows.empty() || rows[0].size() != 2 || (rows[0][0] != "image_id" && rows[0][0] != "path") ||
      rows[0][1] != "label")
    throw DataError(where + ": expected header image_id,label or path,label");
  std::map<std::string, int> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string at = where + ":" + std::to_string(i + 1);
    if (rows[i].size() != 2) throw DataError(at + ": expected 2 fields");
    int label = 0;
    try {
      label = class_index(rows[i][1]);
    } catch (const DataError& e) {
      throw DataError(at + ": " + e.what());
    }
    if (!out.emplace(rows[i][0], label).second) throw DataError(at + ": duplicate id '" + rows[i][0] + "'");
  }
  return out;
}

MetricReport evaluate_records(const std::vector<PredictionRecord>& records, const std::map<std::string, int>& truth) {
  std::vector<int> preds, labels;
  std::vector<std::string> missing;
  for (const auto& r : records) {
    const auto it = truth.find(r.image_id);
    if (it == truth.end()) {
      missing.push_back(r.image_id);
      continue;
    }
    preds.push_back(r.pred_label);
    labels.push_back(it->second);
  }
  if (!missing.empty())
    throw DataError("evaluate: " + std::to_string(missing.size()) + " records have no ground truth: " +
                    id_list(missing));
  return metric_report(confusion_matrix(preds, labels));
}

std::vector<SweepRow> ensemble_sweep(const std::vector<SweepMember>& members,
                                     const std::vector<std::vector<double>>& grid,
                                     const std::map<std::string, int>& truth) {
  if (members.empty()) throw ConfigError("sweep: at least one member is required");
  std::vector<SweepRow> rows;
  std::vector<std::vector<PredictionRecord>> sets;
  std::string all_names;
  for (const auto& m : members) {
    rows.push_back({m.name, "/", evaluate_records(ensemble_records({m.records}, {1.0}), truth)});
    sets.push_back(m.records);
    all_names += (all_names.empty() ? "" : ", ") + m.name;
  }
  if (!grid.empty() && members.size() < 2) throw ConfigError("sweep: a weight grid needs at least two members");
  for (const auto& w : grid) rows.push_back({all_names, weights_label(w), evaluate_records(ensemble_records(sets, w), truth)});
  return rows;
}

std::string format_accuracy(double accuracy) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", std::round(accuracy * 1e4) / 1e4);
  return buf;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "Models,Weights,Accuracy\n";
  for (const auto& r : rows) out += csv_field(r.models) + "," + csv_field(r.weights) + "," + format_accuracy(r.report.accuracy) + "\n";
  return out;
}

}  // namespace cxr
