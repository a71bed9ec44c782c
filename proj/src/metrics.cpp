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

#include "cxr/metrics.hpp"

#include "cxr/error.hpp"

namespace cxr {

int class_index(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (kClassNames[i] == name) return i;
  throw DataError("unknown label '" + std::string(name) + "' (expected COVID-19, Normal or Pneumonia)");
}

std::string class_name(int index) {
  if (index < 0 || index >= kNumClasses) throw DataError("class index " + std::to_string(index) + " out of range");
  return std::string(kClassNames[index]);
}

ConfusionMatrix::ConfusionMatrix(int classes) : k(classes) {
  if (classes < 2) throw DataError("confusion matrix needs at least 2 classes");
  counts.assign(static_cast<std::size_t>(classes * classes), 0);
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t n = 0;
  for (int i = 0; i < k; ++i) n += at(i, i);
  return n;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels, int k) {
  if (preds.size() != labels.size())
    throw DataError("confusion matrix: " + std::to_string(preds.size()) + " predictions for " +
                    std::to_string(labels.size()) + " labels");
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k || preds[i] < 0 || preds[i] >= k)
      throw DataError("confusion matrix: class index out of range at row " + std::to_string(i));
    ++cm.at(labels[i], preds[i]);
  }
  return cm;
}

MetricReport metric_report(const ConfusionMatrix& cm) {
  if (cm.k < 2 || cm.counts.size() != static_cast<std::size_t>(cm.k * cm.k))
    throw DataError("metric report: malformed confusion matrix");
  for (auto c : cm.counts)
    if (c < 0) throw DataError("metric report: negative count");
  MetricReport r;
  r.matrix = cm;
  r.total = cm.total();
  if (r.total == 0) throw DataError("metric report: empty confusion matrix");
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(r.total);

  double sens_sum = 0.0, spec_sum = 0.0, spec_weighted = 0.0;
  int sens_n = 0, spec_n = 0;
  std::int64_t tp_pooled = 0, sens_support = 0, spec_support = 0;
  for (int i = 0; i < cm.k; ++i) {
    ClassMetrics m;
    m.tp = cm.at(i, i);
    for (int j = 0; j < cm.k; ++j) {
      if (j == i) continue;
      m.fn += cm.at(i, j);
      m.fp += cm.at(j, i);
    }
    m.support = m.tp + m.fn;
    m.tn = r.total - m.tp - m.fn - m.fp;
    const std::string name = cm.k == kNumClasses ? class_name(i) : "class " + std::to_string(i);
    if (m.support > 0) {
      m.sensitivity = static_cast<double>(m.tp) / static_cast<double>(m.support);
      sens_sum += *m.sensitivity;
      ++sens_n;
      tp_pooled += m.tp;
      sens_support += m.support;
    } else {
      r.flags.push_back("sensitivity undefined for " + name + " (no samples); excluded from aggregates");
    }
    if (m.tn + m.fp > 0) {
      m.specificity = static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp);
      spec_sum += *m.specificity;
      ++spec_n;
      spec_weighted += static_cast<double>(m.support) * *m.specificity;
      spec_support += m.support;
    } else {
      r.flags.push_back("specificity undefined for " + name + " (no negatives); excluded from aggregates");
    }
    r.per_class.push_back(m);
  }
  if (sens_n > 0) {
    r.macro_sensitivity = sens_sum / sens_n;
    r.micro_sensitivity = static_cast<double>(tp_pooled) / static_cast<double>(sens_support);
  }
  if (spec_n > 0) r.macro_specificity = spec_sum / spec_n;
  if (spec_support > 0) r.micro_specificity = spec_weighted / static_cast<double>(spec_support);
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json matrix = json::array();
  for (int i = 0; i < r.matrix.k; ++i) {
    json row = json::array();
    for (int j = 0; j < r.matrix.k; ++j) row.push_back(r.matrix.at(i, j));
    matrix.push_back(row);
  }
  json classes = json::array();
  for (std::size_t i = 0; i < r.per_class.size(); ++i) {
    const auto& m = r.per_class[i];
    classes.push_back({{"class", r.matrix.k == kNumClasses ? class_name(static_cast<int>(i)) : std::to_string(i)},
                       {"support", m.support},
                       {"tp", m.tp},
                       {"fp", m.fp},
                       {"fn", m.fn},
                       {"tn", m.tn},
                       {"sensitivity", opt(m.sensitivity)},
                       {"specificity", opt(m.specificity)}});
  }
  return json{{"total", r.total},
              {"accuracy", r.accuracy},
              {"sensitivity", {{"macro", opt(r.macro_sensitivity)}, {"micro", opt(r.micro_sensitivity)}}},
              {"specificity", {{"macro", opt(r.macro_specificity)}, {"micro", opt(r.micro_specificity)}}},
              {"per_class", classes},
              {"confusion_matrix", matrix},
              {"flags", r.flags}};
}

}  // namespace cxr
