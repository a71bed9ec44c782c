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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxr/augment.hpp"
#include "cxr/checkpoint.hpp"
#include "cxr/dataset.hpp"
#include "cxr/ensemble.hpp"
#include "cxr/model.hpp"
#include "cxr/optim.hpp"

namespace cxr {

/// Everything a training run depends on. Loaded from one JSON file:
///
///   {
///     "model":      {"preset": "swin_toy", ...overrides} | {"arch": ..., ...},
///     "augment":    {"flip_prob": 0.5, ...}            AugmentPolicy fields;
///                                                      target_size defaults
///                                                      to the model input
///     "optimizer":  {"lr", "beta1", "beta2", "eps", "weight_decay"},
///     "schedule":   {"warmup_epochs": 1 | "warmup_steps": n,
///                    "min_lr": 1e-6, "warmup_start_lr": 1e-6},
///     "label_smoothing": 0.1,
///     "batch_size": 64,
///     "epochs": 1,
///     "seed": 0,
///     "train_manifest": "train.csv",                   relative to the
///     "val_manifest": "val.csv",                       config file
///     "output_dir": "run"
///   }
///
/// Unknown keys raise ConfigError.
struct RunConfig {
  ModelSpec model;
  AugmentPolicy augment;
  AdamWHyper optimizer;
  double warmup_epochs = 1.0;
  std::optional<std::int64_t> warmup_steps;  // overrides warmup_epochs
  double min_lr = 1e-6;
  double warmup_start_lr = 1e-6;
  double label_smoothing = 0.1;
  int batch_size = 64;
  int epochs = 1;
  std::uint64_t seed = 0;
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path output_dir;

  /// Field ranges only; paths are checked when a run starts.
  void validate() const;

  /// Relative paths are resolved against `base_dir`.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  nlohmann::json to_json() const;
};

/// Throws ConfigError naming the file if it is missing or malformed.
RunConfig load_run_config(const std::filesystem::path& path);

/// Warmup is clamped to total_steps - 1; base rate is optimizer.lr.
/// Global step k (1-based) trains with lr_at(k - 1).
Schedule make_schedule(const RunConfig& cfg, std::int64_t steps_per_epoch);

struct EpochReport {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_acc = 0.0;
  std::optional<double> val_sens;  // macro averages
  std::optional<double> val_spec;
  double lr = 0.0;  // rate the next step would use
  double seconds = 0.0;

  bool same_numbers(const EpochReport& other) const;  // all but seconds
};

/// epoch,train_loss,val_acc,val_sens,val_spec,lr,seconds
std::string epoch_reports_to_csv(const std::vector<EpochReport>& reports);

struct EvalError {
  std::string image_id;
  std::string message;
};

struct EvalResult {
  std::vector<PredictionRecord> records;  // manifest order
  std::vector<EvalError> errors;          // unreadable images, skipped
  std::optional<MetricReport> report;     // absent when no record survived
};

/// Softmax of each logit row, computed in double.
std::vector<ClassProbs> probabilities(const Tensor<float>& logits);

/// Runs the deterministic eval pipeline only; never touches an Rng.
EvalResult evaluate(const Classifier<float>& model, const Manifest& manifest, const AugmentPolicy& policy,
                    int batch_size = 64);

/// Evaluation preprocessing matching the checkpoint's model input and
/// training normalization.
AugmentPolicy eval_policy(const Checkpoint& ckpt);

/// image_id,error
std::string eval_errors_to_csv(const std::vector<EvalError>& errors);

struct TrainResult {
  Checkpoint best;  // highest val_acc; ties keep the earlier epoch
  int best_epoch = 0;
  std::vector<EpochReport> epochs;
};

using EpochCallback = std::function<void(const EpochReport&)>;

/// Trains per the config. After every epoch, `epochs.csv` in the output
/// directory is rewritten and `best.ckpt` is replaced when validation
/// accuracy strictly improves. A non-finite loss throws NumericError and
/// leaves the last best checkpoint in place.
///
/// Random streams are derived from cfg.seed per purpose, so results depend
/// only on the config:
///   (0)                 model initialization
///   (1, epoch)          sample order
///   (2, epoch, sample)  augmentation of one sample
///   (3, epoch, step)    stochastic depth
TrainResult train_run(const RunConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace cxr
