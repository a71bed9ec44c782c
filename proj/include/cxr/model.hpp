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
#include <memory>
#include <string>

#include <json.hpp>

#include "cxr/swin.hpp"
#include "cxr/tnt.hpp"

namespace cxr {

enum class ModelKind { Swin, Tnt };

std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// Architecture plus hyperparameters; everything needed to rebuild a model.
struct ModelSpec {
  ModelKind kind = ModelKind::Swin;
  SwinConfig swin = SwinConfig::toy();
  TntConfig tnt = TntConfig::toy();

  /// Named presets: swin_toy, swin_b, tnt_toy, tnt_s.
  static ModelSpec preset(const std::string& name);

  int input_size() const { return kind == ModelKind::Swin ? swin.img_size : tnt.img_size; }
  int num_classes() const { return kind == ModelKind::Swin ? swin.num_classes : tnt.num_classes; }
  double drop_path_rate() const { return kind == ModelKind::Swin ? swin.drop_path_rate : tnt.drop_path_rate; }
  Index parameter_count() const { return kind == ModelKind::Swin ? swin.parameter_count() : tnt.parameter_count(); }
  void validate() const;

  /// {"arch": "swin"|"tnt", ...fields of the active config}
  nlohmann::json to_json() const;
  /// Accepts {"preset": name, ...overrides} or a full field set. Throws ConfigError.
  static ModelSpec from_json(const nlohmann::json& j);
};

template <typename T>
std::unique_ptr<Classifier<T>> make_classifier(const ModelSpec& spec, std::uint64_t seed);

}  // namespace cxr
