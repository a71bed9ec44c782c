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

#include <sstream>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cxr/checkpoint.hpp"
#include "cxr/cli.hpp"
#include "cxr/dataset.hpp"
#include "cxr/diagnostics.hpp"
#include "cxr/ensemble.hpp"
#include "cxr/metrics.hpp"
#include "cxr/optim.hpp"
#include "cxr/trainer.hpp"

namespace py = pybind11;
using namespace cxr;

namespace {

/// A checkpointed classifier held in float, with its evaluation preprocessing.
class LoadedModel {
 public:
  explicit LoadedModel(const std::filesystem::path& path)
      : ckpt_(load_checkpoint(path)), model_(model_from_checkpoint<float>(ckpt_)) {}

  std::string arch() const { return model_kind_name(ckpt_.spec.kind); }
  int input_size() const { return model_->input_size(); }
  int num_classes() const { return model_->num_classes(); }
  Index parameter_count() const { return ckpt_.spec.parameter_count(); }
  int epoch() const { return ckpt_.epoch; }
  double val_acc() const { return ckpt_.val_acc; }

  /// images float32 [B, 3, S, S], already normalized -> probabilities [B, K].
  py::array_t<double> predict_proba(py::array_t<float, py::array::c_style | py::array::forcecast> images) const {
    const auto s = input_size();
    if (images.ndim() != 4 || images.shape(1) != 3 || images.shape(2) != s || images.shape(3) != s)
      throw ShapeError("predict_proba: expected [B, 3, " + std::to_string(s) + ", " + std::to_string(s) + "]");
    const Shape shape{images.shape(0), 3, s, s};
    Tensor<float> x(shape, std::vector<float>(images.data(), images.data() + images.size()));
    std::vector<ClassProbs> probs;
    {
      py::gil_scoped_release release;
      NoGradGuard no_grad;
      probs = probabilities(model_->forward(x));
    }
    py::array_t<double> out({static_cast<py::ssize_t>(probs.size()), static_cast<py::ssize_t>(kNumClasses)});
    auto view = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < probs.size(); ++i)
      for (int k = 0; k < kNumClasses; ++k) view(static_cast<py::ssize_t>(i), k) = probs[i][k];
    return out;
  }

  /// Reads one image file and applies the checkpoint's evaluation pipeline.
  py::array_t<float> preprocess(const std::filesystem::path& path) const {
    const auto t = eval_pipeline(read_image(path), eval_policy(ckpt_));
    py::array_t<float> out({t.dim(0), t.dim(1), t.dim(2)});
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
  }

 private:
  Checkpoint ckpt_;
  std::unique_ptr<Classifier<float>> model_;
};

py::tuple cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> full{"cxrformer"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : full) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

std::string metric_report_json(const std::vector<std::vector<std::int64_t>>& counts) {
  ConfusionMatrix cm(static_cast<int>(counts.size()));
  for (std::size_t r = 0; r < counts.size(); ++r) {
    if (counts[r].size() != counts.size()) throw ShapeError("metric_report: confusion matrix must be square");
    for (std::size_t c = 0; c < counts.size(); ++c) cm.at(static_cast<int>(r), static_cast<int>(c)) = counts[r][c];
  }
  return to_json(metric_report(cm)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Swin and TNT chest X-ray classifiers: native core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());

  m.attr("CLASS_NAMES") = py::make_tuple(std::string(kClassNames[0]), std::string(kClassNames[1]),
                                         std::string(kClassNames[2]));

  m.def("run_cli", &cli_main, py::arg("args"),
        "Runs the command-line tool in process; returns (exit_code, stdout, stderr).");

  m.def(
      "make_synthetic",
      [](const std::filesystem::path& out_dir, int per_class, std::uint64_t seed, int size) {
        make_synthetic(out_dir, per_class, seed, size);
        return out_dir / "manifest.csv";
      },
      py::arg("out_dir"), py::arg("per_class"), py::arg("seed") = 0, py::arg("size") = 64,
      "Writes a seeded three-class image set; returns the path of its manifest.csv.");

  m.def(
      "lr_at",
      [](std::int64_t step, std::int64_t warmup_steps, std::int64_t total_steps, double base_lr, double min_lr,
         double warmup_start_lr) {
        Schedule s{warmup_steps, total_steps, base_lr, min_lr, warmup_start_lr};
        s.validate();
        return lr_at(step, s);
      },
      py::arg("step"), py::arg("warmup_steps"), py::arg("total_steps"), py::arg("base_lr"), py::arg("min_lr") = 1e-6,
      py::arg("warmup_start_lr") = 1e-6, "Linear warmup then cosine decay, evaluated at one step.");

  m.def("_metric_report_json", &metric_report_json, py::arg("counts"));

  m.def(
      "weighted_average",
      [](const std::vector<ClassProbs>& members, const std::vector<double>& weights) {
        return weighted_average(members, normalize_weights(weights));
      },
      py::arg("members"), py::arg("weights"), "Weighted mean of member probability vectors.");

  m.def(
      "gradcheck",
      [](const std::string& preset, std::uint64_t seed, std::size_t per_tensor) {
        py::gil_scoped_release release;
        const auto r = model_gradcheck(ModelSpec::preset(preset), seed, per_tensor);
        return std::make_tuple(r.max_rel_error, r.checked, r.worst);
      },
      py::arg("preset") = "swin_toy", py::arg("seed") = 0, py::arg("per_tensor") = 16,
      "Central-difference check of a preset model; returns (max_rel_error, checked, worst).");

  py::class_<LoadedModel>(m, "Model")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def_property_readonly("arch", &LoadedModel::arch)
      .def_property_readonly("input_size", &LoadedModel::input_size)
      .def_property_readonly("num_classes", &LoadedModel::num_classes)
      .def_property_readonly("parameter_count", &LoadedModel::parameter_count)
      .def_property_readonly("epoch", &LoadedModel::epoch)
      .def_property_readonly("val_acc", &LoadedModel::val_acc)
      .def("preprocess", &LoadedModel::preprocess, py::arg("path"))
      .def("predict_proba", &LoadedModel::predict_proba, py::arg("images"));
}
