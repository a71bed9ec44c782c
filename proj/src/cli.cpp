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

#include "cxr/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cxr/augment.hpp"
#include "cxr/checkpoint.hpp"
#include "cxr/dataset.hpp"
#include "cxr/diagnostics.hpp"
#include "cxr/ensemble.hpp"
#include "cxr/error.hpp"
#include "cxr/io.hpp"
#include "cxr/trainer.hpp"

namespace cxr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

fs::path sidecar_path(const fs::path& out) { return fs::path(out.string() + ".errors.csv"); }

/// Writes the skipped-image list next to `out`, or removes a stale one.
void write_sidecar(const fs::path& out, const std::vector<EvalError>& errors) {
  const auto path = sidecar_path(out);
  if (errors.empty()) {
    fs::remove(path);
    return;
  }
  write_file_atomic(path, eval_errors_to_csv(errors));
}

struct TrainArgs {
  std::string config;
  std::optional<int> epochs, batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<std::string> output_dir, train_manifest, val_manifest;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig cfg = load_run_config(a.config);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.seed) cfg.seed = *a.seed;
  if (a.lr) cfg.optimizer.lr = *a.lr;
  if (a.output_dir) cfg.output_dir = *a.output_dir;
  if (a.train_manifest) cfg.train_manifest = *a.train_manifest;
  if (a.val_manifest) cfg.val_manifest = *a.val_manifest;
  cfg.validate();

  const auto result = train_run(cfg, [&](const EpochReport& r) {
    if (a.quiet) return;
    out << "epoch " << r.epoch << "/" << cfg.epochs << "  loss " << fixed(r.train_loss, 4) << "  val_acc "
        << fixed(r.val_acc, 4) << "  lr " << format_double(r.lr) << "  (" << fixed(r.seconds, 1) << " s)\n"
        << std::flush;
  });
  out << "best epoch " << result.best_epoch << " val_acc " << fixed(result.best.val_acc, 4) << " -> "
      << (cfg.output_dir / "best.ckpt").string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, manifest, out;
  int batch_size = 64;
};

EvalResult run_eval(const EvalArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const auto model = model_from_checkpoint<float>(ckpt);
  return evaluate(*model, read_manifest(a.manifest), eval_policy(ckpt), a.batch_size);
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto result = run_eval(a);
  if (!result.report) throw DataError(a.manifest + ": no image could be read");
  const json report{{"records", result.records.size()},
                    {"skipped", result.errors.size()},
                    {"metrics", to_json(*result.report)}};
  if (a.out.empty()) {
    out << report.dump(2) << "\n";
  } else {
    write_file_atomic(a.out, report.dump(2) + "\n");
    write_sidecar(a.out, result.errors);
    out << "accuracy " << format_accuracy(result.report->accuracy) << " over " << result.records.size()
        << " images -> " << a.out << "\n";
  }
  if (!result.errors.empty()) err << result.errors.size() << " images skipped (unreadable)\n";
  return kExitOk;
}

int cmd_predict(const EvalArgs& a, std::ostream& out) {
  const auto result = run_eval(a);
  write_predictions(a.out, result.records);
  write_sidecar(a.out, result.errors);
  out << "wrote " << result.records.size() << " records to " << a.out;
  if (!result.errors.empty())
    out << " (" << result.errors.size() << " skipped, listed in " << sidecar_path(a.out).string() << ")";
  out << "\n";
  return kExitOk;
}

std::vector<double> weights_for(const std::string& text, std::size_t members) {
  std::vector<double> w = text.empty() ? std::vector<double>(members, 1.0) : parse_weights(text);
  if (w.size() != members)
    throw ConfigError(std::to_string(w.size()) + " weights given for " + std::to_string(members) + " members");
  return w;
}

struct EnsembleArgs {
  std::vector<std::string> members;
  std::string weights, truth, out, records;
};

int cmd_ensemble(const EnsembleArgs& a, std::ostream& out) {
  const auto weights = weights_for(a.weights, a.members.size());
  std::vector<std::vector<PredictionRecord>> sets;
  for (const auto& m : a.members) sets.push_back(read_predictions(m));
  const auto truth = read_truth(a.truth);
  const auto records = ensemble_records(sets, weights);
  const auto report = evaluate_records(records, truth);
  const json doc{{"members", a.members.size()},
                 {"weights", normalize_weights(weights)},
                 {"records", records.size()},
                 {"metrics", to_json(report)}};
  write_file_atomic(a.out, doc.dump(2) + "\n");
  if (!a.records.empty()) write_predictions(a.records, records);
  out << "ensemble accuracy " << format_accuracy(report.accuracy) << " over " << records.size() << " images -> "
      << a.out << "\n";
  return kExitOk;
}

struct SweepArgs {
  std::vector<std::string> members, names, grid;
  std::string truth, out;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  if (!a.names.empty() && a.names.size() != a.members.size())
    throw ConfigError(std::to_string(a.names.size()) + " names given for " + std::to_string(a.members.size()) +
                      " members");
  std::vector<SweepMember> members;
  for (std::size_t i = 0; i < a.members.size(); ++i)
    members.push_back({a.names.empty() ? fs::path(a.members[i]).stem().string() : a.names[i],
                       read_predictions(a.members[i])});
  std::vector<std::vector<double>> grid;
  for (const auto& g : a.grid) grid.push_back(weights_for(g, members.size()));
  const auto csv = sweep_to_csv(ensemble_sweep(members, grid, read_truth(a.truth)));
  if (!a.out.empty()) write_file_atomic(a.out, csv);
  out << csv;
  return kExitOk;
}

struct GradcheckArgs {
  std::string model = "swin_toy";
  std::uint64_t seed = 0;
  std::size_t per_tensor = 16;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto report = model_gradcheck(ModelSpec::preset(a.model), a.seed, a.per_tensor);
  out << a.model << ": max relative error " << report.max_rel_error << " over " << report.checked
      << " components (worst " << report.worst << ")\n";
  if (!(report.max_rel_error < a.tolerance))
    throw NumericError("gradcheck failed: " + std::to_string(report.max_rel_error) + " >= tolerance " +
                       std::to_string(a.tolerance));
  return kExitOk;
}

struct PreviewArgs {
  std::string image, out;
  int n = 4;
  std::uint64_t seed = 0;
  int size = 224;
};

std::string trace_line(const StageTrace& trace) {
  std::string line;
  for (const auto& r : trace) {
    line += (line.empty() ? "" : " -> ") + std::string(stage_name(r.stage));
    if (!r.applied) line += "(skipped)";
    else if (!r.detail.empty()) line += "(" + r.detail + ")";
  }
  return line;
}

int cmd_preview(const PreviewArgs& a, std::ostream& out) {
  if (a.n < 0) throw ConfigError("--n must be >= 0");
  AugmentPolicy policy;
  policy.target_size = a.size;
  policy.validate();
  const ImageTensor image = read_image(a.image);
  const std::string ext = image.channels == 1 ? ".pgm" : ".ppm";
  fs::create_directories(a.out);

  StageTrace eval_trace;
  eval_pipeline(image, policy, &eval_trace);
  write_file_atomic(fs::path(a.out) / ("eval" + ext), encode_pnm(resize_bilinear(image, a.size, a.size)));
  out << "eval: " << trace_line(eval_trace) << "\n";
  for (int i = 0; i < a.n; ++i) {
    Rng rng = Rng::derive(a.seed, {static_cast<std::uint64_t>(i)});
    StageTrace trace;
    const auto augmented = train_augment(image, policy, rng, &trace);
    char name[32];
    std::snprintf(name, sizeof name, "train_%03d", i);
    write_file_atomic(fs::path(a.out) / (name + ext), encode_pnm(augmented));
    out << name << ": " << trace_line(trace) << " -> normalize\n";
  }
  return kExitOk;
}

struct SyntheticArgs {
  std::string out;
  int n = 10;
  std::uint64_t seed = 0;
  int size = 64;
};

int cmd_make_synthetic(const SyntheticArgs& a, std::ostream& out) {
  const auto m = make_synthetic(a.out, a.n, a.seed, a.size);
  out << "wrote " << m.rows.size() << " images and manifest.csv to " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chest X-ray classification with Swin and TNT vision transformers"};
  app.name("cxrformer");
  app.require_subcommand(1);
  app.footer("Exit codes: 0 ok, 1 usage, 2 config, 3 data, 4 numeric, 5 checkpoint.");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train one model from a run config");
  t->add_option("--config", train.config, "Run config JSON")->required();
  t->add_option("--epochs", train.epochs, "Override epochs");
  t->add_option("--batch-size", train.batch_size, "Override batch_size");
  t->add_option("--seed", train.seed, "Override seed");
  t->add_option("--lr", train.lr, "Override optimizer.lr");
  t->add_option("--output-dir", train.output_dir, "Override output_dir");
  t->add_option("--train-manifest", train.train_manifest, "Override train_manifest");
  t->add_option("--val-manifest", train.val_manifest, "Override val_manifest");
  t->add_flag("--quiet", train.quiet, "No per-epoch lines");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Metrics of a checkpoint on a labelled manifest");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  e->add_option("--manifest", eval.manifest, "Manifest CSV (path,label)")->required();
  e->add_option("--out", eval.out, "Report JSON (default: stdout)");
  e->add_option("--batch-size", eval.batch_size, "Images per forward pass")->check(CLI::PositiveNumber);

  EvalArgs predict;
  auto* p = app.add_subcommand("predict", "Per-image class probabilities as CSV");
  p->add_option("--checkpoint", predict.checkpoint, "Checkpoint file")->required();
  p->add_option("--manifest", predict.manifest, "Manifest CSV (path,label)")->required();
  p->add_option("--out", predict.out, "Prediction CSV")->required();
  p->add_option("--batch-size", predict.batch_size, "Images per forward pass")->check(CLI::PositiveNumber);

  EnsembleArgs ens;
  auto* en = app.add_subcommand("ensemble", "Weighted average of prediction files");
  en->add_option("--members", ens.members, "Prediction CSVs")->required();
  en->add_option("--weights", ens.weights, "Positive weights, e.g. 2,1 or 2:1 (default: equal)");
  en->add_option("--truth", ens.truth, "Ground truth CSV (image_id,label or path,label)")->required();
  en->add_option("--out", ens.out, "Metric report JSON")->required();
  en->add_option("--records", ens.records, "Ensembled prediction CSV");

  SweepArgs sweep;
  auto* sw = app.add_subcommand("sweep", "Solo and weighted-ensemble accuracy table");
  sw->add_option("--members", sweep.members, "Prediction CSVs")->required();
  sw->add_option("--names", sweep.names, "Display names (default: file stems)");
  sw->add_option("--grid", sweep.grid, "Weight vectors, e.g. 1:1 2:1");
  sw->add_option("--truth", sweep.truth, "Ground truth CSV")->required();
  sw->add_option("--out", sweep.out, "Table CSV (Models,Weights,Accuracy)");

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of a model's gradients");
  g->add_option("--model", gc.model, "Preset: swin_toy, tnt_toy, swin_b, tnt_s");
  g->add_option("--seed", gc.seed, "Initialization and input seed");
  g->add_option("--per-tensor", gc.per_tensor, "Components checked per tensor (0 = all)");
  g->add_option("--tolerance", gc.tolerance, "Maximum relative error");

  PreviewArgs preview;
  auto* pv = app.add_subcommand("augment-preview", "Write augmented samples of one image with stage traces");
  pv->add_option("--image", preview.image, "PGM/PPM image")->required();
  pv->add_option("--out", preview.out, "Output directory")->required();
  pv->add_option("--n", preview.n, "Number of training samples");
  pv->add_option("--seed", preview.seed, "Augmentation seed");
  pv->add_option("--size", preview.size, "Target side length");

  SyntheticArgs synth;
  auto* ms = app.add_subcommand("make-synthetic", "Write a seeded three-class synthetic dataset");
  ms->add_option("--out", synth.out, "Output directory")->required();
  ms->add_option("--n", synth.n, "Images per class");
  ms->add_option("--seed", synth.seed, "Generator seed");
  ms->add_option("--size", synth.size, "Image side length");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*t) return cmd_train(train, out);
    if (*e) return cmd_eval(eval, out, err);
    if (*p) return cmd_predict(predict, out);
    if (*en) return cmd_ensemble(ens, out);
    if (*sw) return cmd_sweep(sweep, out);
    if (*g) return cmd_gradcheck(gc, out);
    if (*pv) return cmd_preview(preview, out);
    if (*ms) return cmd_make_synthetic(synth, out);
  } catch (const CheckpointError& ex) {
    err << "checkpoint error: " << ex.what() << "\n";
    return kExitCheckpoint;
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const ShapeError& ex) {
    err << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const DataError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitData;
  } catch (const NumericError& ex) {
    err << "numeric error: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitData;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace cxr
