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

#include "cxr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <type_traits>

#include "cxr/error.hpp"
#include "cxr/io.hpp"
#include "cxr/ops.hpp"

namespace cxr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Reads named fields from one JSON object and rejects any it did not read.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError((where_.empty() ? "top level" : where_) + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename V>
  void take(const char* key, V& out) {
    if (!j_.contains(key)) return;
    const json& v = raw(key);
    if constexpr (std::is_integral_v<V>) {
      if (!v.is_number_integer()) throw ConfigError(name(key) + ": expected an integer");
      if constexpr (std::is_unsigned_v<V>)
        if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0) throw ConfigError(name(key) + ": expected a non-negative integer");
    }
    try {
      out = v.template get<V>();
    } catch (const json::exception& e) {
      throw ConfigError(name(key) + ": " + e.what());
    }
  }

  void take_path(const char* key, fs::path& out, const fs::path& base) {
    std::string text;
    take(key, text);
    if (text.empty()) return;
    const fs::path p(text);
    out = p.is_absolute() ? p : base / p;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown field '" + name(item.key().c_str()) + "'");
  }

  std::string name(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

AugmentPolicy policy_from_json(const json& j, int default_size) {
  AugmentPolicy p;
  p.target_size = default_size;
  Fields f(j, "augment");
  f.take("target_size", p.target_size);
  f.take("flip_prob", p.flip_prob);
  f.take("affine_prob", p.affine_prob);
  f.take("max_rotation_deg", p.max_rotation_deg);
  f.take("max_translate_frac", p.max_translate_frac);
  f.take("erase_prob", p.erase_prob);
  f.take("erase_area_range", p.erase_area_range);
  f.take("erase_aspect_range", p.erase_aspect_range);
  f.take("erase_fill", p.erase_fill);
  f.take("mean", p.mean);
  f.take("std", p.std);
  f.finish();
  return p;
}

json policy_to_json(const AugmentPolicy& p) {
  return {{"target_size", p.target_size},
          {"flip_prob", p.flip_prob},
          {"affine_prob", p.affine_prob},
          {"max_rotation_deg", p.max_rotation_deg},
          {"max_translate_frac", p.max_translate_frac},
          {"erase_prob", p.erase_prob},
          {"erase_area_range", p.erase_area_range},
          {"erase_aspect_range", p.erase_aspect_range},
          {"erase_fill", p.erase_fill},
          {"mean", p.mean},
          {"std", p.std}};
}

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

void require_three_classes(const Classifier<float>& model) {
  if (model.num_classes() != kNumClasses)
    throw ConfigError("model predicts " + std::to_string(model.num_classes()) + " classes; the label set has " +
                      std::to_string(kNumClasses));
}

/// Stacks [3, S, S] samples into [B, 3, S, S].
Tensor<float> stack(const std::vector<Tensor<float>>& samples) {
  Shape shape = samples.front().shape();
  shape.insert(shape.begin(), static_cast<Index>(samples.size()));
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(numel(shape)));
  for (const auto& s : samples) data.insert(data.end(), s.data().begin(), s.data().end());
  return Tensor<float>(std::move(shape), std::move(data));
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  augment.validate();
  optimizer.validate();
  if (augment.target_size != model.input_size())
    throw ConfigError("augment.target_size " + std::to_string(augment.target_size) + " differs from the model input " +
                      std::to_string(model.input_size()));
  if (model.num_classes() != kNumClasses)
    throw ConfigError("model.num_classes must be " + std::to_string(kNumClasses));
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw ConfigError("label_smoothing must be in [0, 1)");
  if (!(warmup_epochs >= 0.0) || !std::isfinite(warmup_epochs)) throw ConfigError("schedule.warmup_epochs must be >= 0");
  if (warmup_steps && *warmup_steps < 0) throw ConfigError("schedule.warmup_steps must be >= 0");
  if (!(min_lr >= 0.0) || !(warmup_start_lr >= 0.0)) throw ConfigError("schedule rates must be >= 0");
  if (min_lr > optimizer.lr) throw ConfigError("schedule.min_lr exceeds optimizer.lr");
  if (train_manifest.empty()) throw ConfigError("train_manifest is required");
  if (val_manifest.empty()) throw ConfigError("val_manifest is required");
  if (output_dir.empty()) throw ConfigError("output_dir is required");
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  Fields f(j, "");
  if (!f.has("model")) throw ConfigError("model is required");
  c.model = ModelSpec::from_json(f.raw("model"));
  c.augment = policy_from_json(f.has("augment") ? f.raw("augment") : json::object(), c.model.input_size());
  if (f.has("optimizer")) {
    Fields o(f.raw("optimizer"), "optimizer");
    o.take("lr", c.optimizer.lr);
    o.take("beta1", c.optimizer.beta1);
    o.take("beta2", c.optimizer.beta2);
    o.take("eps", c.optimizer.eps);
    o.take("weight_decay", c.optimizer.weight_decay);
    o.finish();
  }
  if (f.has("schedule")) {
    Fields s(f.raw("schedule"), "schedule");
    s.take("warmup_epochs", c.warmup_epochs);
    if (s.has("warmup_steps")) {
      std::int64_t steps = 0;
      s.take("warmup_steps", steps);
      c.warmup_steps = steps;
    }
    s.take("min_lr", c.min_lr);
    s.take("warmup_start_lr", c.warmup_start_lr);
    s.finish();
  }
  f.take("label_smoothing", c.label_smoothing);
  f.take("batch_size", c.batch_size);
  f.take("epochs", c.epochs);
  f.take("seed", c.seed);
  f.take_path("train_manifest", c.train_manifest, base_dir);
  f.take_path("val_manifest", c.val_manifest, base_dir);
  f.take_path("output_dir", c.output_dir, base_dir);
  f.finish();
  c.validate();
  return c;
}

json RunConfig::to_json() const {
  json schedule{{"warmup_epochs", warmup_epochs}, {"min_lr", min_lr}, {"warmup_start_lr", warmup_start_lr}};
  if (warmup_steps) schedule["warmup_steps"] = *warmup_steps;
  return {{"model", model.to_json()},
          {"augment", policy_to_json(augment)},
          {"optimizer",
           {{"lr", optimizer.lr},
            {"beta1", optimizer.beta1},
            {"beta2", optimizer.beta2},
            {"eps", optimizer.eps},
            {"weight_decay", optimizer.weight_decay}}},
          {"schedule", schedule},
          {"label_smoothing", label_smoothing},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed},
          {"train_manifest", train_manifest.string()},
          {"val_manifest", val_manifest.string()},
          {"output_dir", output_dir.string()}};
}

RunConfig load_run_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file_text(path);
  } catch (const Error& e) {
    throw ConfigError("run config " + path.string() + ": " + e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("run config " + path.string() + ": " + e.what());
  }
  try {
    return RunConfig::from_json(j, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError("run config " + path.string() + ": " + e.what());
  }
}

Schedule make_schedule(const RunConfig& cfg, std::int64_t steps_per_epoch) {
  Schedule s;
  s.total_steps = steps_per_epoch * cfg.epochs;
  const std::int64_t warmup =
      cfg.warmup_steps ? *cfg.warmup_steps
                       : static_cast<std::int64_t>(std::llround(cfg.warmup_epochs * static_cast<double>(steps_per_epoch)));
  s.warmup_steps = std::min(warmup, s.total_steps - 1);
  s.base_lr = cfg.optimizer.lr;
  s.min_lr = cfg.min_lr;
  s.warmup_start_lr = cfg.warmup_start_lr;
  s.validate();
  return s;
}

bool EpochReport::same_numbers(const EpochReport& o) const {
  return epoch == o.epoch && train_loss == o.train_loss && val_acc == o.val_acc && val_sens == o.val_sens &&
         val_spec == o.val_spec && lr == o.lr;
}

std::string epoch_reports_to_csv(const std::vector<EpochReport>& reports) {
  std::string out = "epoch,train_loss,val_acc,val_sens,val_spec,lr,seconds\n";
  for (const auto& r : reports) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.val_acc) + "," +
           optional_field(r.val_sens) + "," + optional_field(r.val_spec) + "," + format_double(r.lr) + "," +
           format_double(r.seconds) + "\n";
  }
  return out;
}

std::vector<ClassProbs> probabilities(const Tensor<float>& logits) {
  if (logits.rank() != 2 || logits.dim(1) != kNumClasses)
    throw ShapeError("probabilities: expected [B, " + std::to_string(kNumClasses) + "] logits, got " +
                     shape_str(logits.shape()));
  const auto d = logits.data();
  std::vector<ClassProbs> out(static_cast<std::size_t>(logits.dim(0)));
  for (std::size_t b = 0; b < out.size(); ++b) {
    const float* row = d.data() + b * kNumClasses;
    const double top = *std::max_element(row, row + kNumClasses);
    double total = 0.0;
    for (int k = 0; k < kNumClasses; ++k) total += out[b][k] = std::exp(static_cast<double>(row[k]) - top);
    for (auto& p : out[b]) p /= total;
  }
  return out;
}

EvalResult evaluate(const Classifier<float>& model, const Manifest& manifest, const AugmentPolicy& policy,
                    int batch_size) {
  require_three_classes(model);
  if (batch_size < 1) throw ConfigError("evaluate: batch_size must be >= 1");
  if (policy.target_size != model.input_size())
    throw ConfigError("evaluate: policy target_size " + std::to_string(policy.target_size) +
                      " differs from the model input " + std::to_string(model.input_size()));
  NoGradGuard no_grad;
  EvalResult result;
  std::vector<int> labels;
  std::vector<Tensor<float>> batch;
  std::vector<const ManifestRow*> rows;
  auto flush = [&] {
    if (batch.empty()) return;
    const auto probs = probabilities(model.forward(stack(batch)));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      result.records.push_back({rows[i]->path, probs[i], classify(probs[i])});
      labels.push_back(rows[i]->label);
    }
    batch.clear();
    rows.clear();
  };
  for (const auto& row : manifest.rows) {
    try {
      batch.push_back(eval_pipeline(read_image(manifest.resolve(row)), policy));
      rows.push_back(&row);
    } catch (const Error& e) {
      result.errors.push_back({row.path, e.what()});
      continue;
    }
    if (static_cast<int>(batch.size()) == batch_size) flush();
  }
  flush();
  if (!result.records.empty()) {
    std::vector<int> preds;
    for (const auto& r : result.records) preds.push_back(r.pred_label);
    result.report = metric_report(confusion_matrix(preds, labels));
  }
  return result;
}

AugmentPolicy eval_policy(const Checkpoint& ckpt) {
  AugmentPolicy p;
  p.target_size = ckpt.spec.input_size();
  p.mean = ckpt.norm_mean;
  p.std = ckpt.norm_std;
  return p;
}

std::string eval_errors_to_csv(const std::vector<EvalError>& errors) {
  std::string out = "image_id,error\n";
  for (const auto& e : errors) out += csv_field(e.image_id) + "," + csv_field(e.message) + "\n";
  return out;
}

TrainResult train_run(const RunConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  const Manifest train = read_manifest(cfg.train_manifest);
  const Manifest val = read_manifest(cfg.val_manifest);
  if (train.rows.empty()) throw DataError(cfg.train_manifest.string() + ": training manifest is empty");
  if (val.rows.empty()) throw DataError(cfg.val_manifest.string() + ": validation manifest is empty");
  require_files(train);
  require_files(val);

  std::vector<ImageTensor> images;
  std::vector<int> labels;
  images.reserve(train.rows.size());
  for (const auto& row : train.rows) {
    images.push_back(read_image(train.resolve(row)));
    labels.push_back(row.label);
  }

  const auto n = static_cast<std::int64_t>(images.size());
  const std::int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const Schedule schedule = make_schedule(cfg, steps_per_epoch);

  auto model = make_classifier<float>(cfg.model, Rng::derive(cfg.seed, {0}).next_u64());
  const auto params = model->parameters();
  OptState<float> opt;

  fs::create_directories(cfg.output_dir);
  write_file_atomic(cfg.output_dir / "run_config.json", cfg.to_json().dump(2) + "\n");
  const fs::path best_path = cfg.output_dir / "best.ckpt";

  TrainResult result;
  const auto seed = cfg.seed;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const auto e = static_cast<std::uint64_t>(epoch);
    Rng order_rng = Rng::derive(seed, {1, e});
    const auto order = order_rng.permutation(images.size());

    double loss_sum = 0.0;
    for (std::int64_t step = 0; step < steps_per_epoch; ++step) {
      const auto begin = static_cast<std::size_t>(step * cfg.batch_size);
      const auto end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Tensor<float>> samples;
      std::vector<int> targets;
      for (std::size_t i = begin; i < end; ++i) {
        const auto idx = order[i];
        Rng aug = Rng::derive(seed, {2, e, static_cast<std::uint64_t>(idx)});
        samples.push_back(train_pipeline(images[idx], cfg.augment, aug));
        targets.push_back(labels[idx]);
      }
      const std::int64_t global = (epoch - 1) * steps_per_epoch + step;
      Rng drop = Rng::derive(seed, {3, e, static_cast<std::uint64_t>(step)});
      ForwardContext<float> ctx{true, &drop, nullptr};
      try {
        const auto loss = label_smoothed_ce(model->forward(stack(samples), ctx), targets, cfg.label_smoothing);
        loss_sum += static_cast<double>(loss.item()) * static_cast<double>(targets.size());
        backward(loss);
        adamw_step(params, opt, cfg.optimizer, lr_at(global, schedule));
      } catch (const NumericError& err) {
        const std::string kept = result.best_epoch ? "best checkpoint from epoch " + std::to_string(result.best_epoch) +
                                                         " kept at " + best_path.string()
                                                   : "no checkpoint written yet";
        throw NumericError("epoch " + std::to_string(epoch) + " step " + std::to_string(step + 1) + ": " +
                           err.what() + "; " + kept);
      }
      for (auto p : params) p.tensor.zero_grad();
    }

    const EvalResult eval = evaluate(*model, val, cfg.augment, cfg.batch_size);
    if (!eval.report) throw DataError(cfg.val_manifest.string() + ": no validation image could be read");
    if (epoch == 1 && !eval.errors.empty())
      write_file_atomic(cfg.output_dir / "val_errors.csv", eval_errors_to_csv(eval.errors));

    EpochReport report;
    report.epoch = epoch;
    report.train_loss = loss_sum / static_cast<double>(n);
    report.val_acc = eval.report->accuracy;
    report.val_sens = eval.report->macro_sensitivity;
    report.val_spec = eval.report->macro_specificity;
    report.lr = lr_at(epoch * steps_per_epoch, schedule);
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (result.best_epoch == 0 || report.val_acc > result.best.val_acc) {
      result.best = capture_checkpoint(cfg.model, *model, &opt);
      result.best.epoch = epoch;
      result.best.val_acc = report.val_acc;
      result.best.seed = seed;
      result.best.rng_state = order_rng.state();
      result.best.norm_mean = cfg.augment.mean;
      result.best.norm_std = cfg.augment.std;
      result.best_epoch = epoch;
      save_checkpoint(result.best, best_path);
    }
    result.epochs.push_back(report);
    write_file_atomic(cfg.output_dir / "epochs.csv", epoch_reports_to_csv(result.epochs));
    if (on_epoch) on_epoch(report);
  }
  return result;
}

}  // namespace cxr
