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

#include "cxr/model.hpp"

#include <set>

#include "cxr/error.hpp"

namespace cxr {

using nlohmann::json;

std::string model_kind_name(ModelKind kind) { return kind == ModelKind::Swin ? "swin" : "tnt"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "swin") return ModelKind::Swin;
  if (name == "tnt") return ModelKind::Tnt;
  throw ConfigError("unknown architecture '" + name + "' (expected swin or tnt)");
}

ModelSpec ModelSpec::preset(const std::string& name) {
  ModelSpec spec;
  if (name == "swin_toy") {
    spec.kind = ModelKind::Swin;
  } else if (name == "swin_b") {
    spec.kind = ModelKind::Swin;
    spec.swin = SwinConfig::swin_base();
  } else if (name == "tnt_toy") {
    spec.kind = ModelKind::Tnt;
  } else if (name == "tnt_s") {
    spec.kind = ModelKind::Tnt;
    spec.tnt = TntConfig::tnt_small();
  } else {
    throw ConfigError("unknown model preset '" + name + "' (expected swin_toy, swin_b, tnt_toy or tnt_s)");
  }
  return spec;
}

void ModelSpec::validate() const {
  if (kind == ModelKind::Swin) {
    swin.validate();
  } else {
    tnt.validate();
  }
}

json ModelSpec::to_json() const {
  if (kind == ModelKind::Swin) {
    return json{{"arch", "swin"},
                {"img_size", swin.img_size},
                {"patch_size", swin.patch_size},
                {"embed_dim", swin.embed_dim},
                {"depths", swin.depths},
                {"num_heads", swin.num_heads},
                {"window_size", swin.window_size},
                {"mlp_ratio", swin.mlp_ratio},
                {"num_classes", swin.num_classes},
                {"drop_path_rate", swin.drop_path_rate}};
  }
  return json{{"arch", "tnt"},
              {"img_size", tnt.img_size},
              {"sentence_patch", tnt.sentence_patch},
              {"word_patch", tnt.word_patch},
              {"outer_dim", tnt.outer_dim},
              {"inner_dim", tnt.inner_dim},
              {"depth", tnt.depth},
              {"outer_heads", tnt.outer_heads},
              {"inner_heads", tnt.inner_heads},
              {"mlp_ratio", tnt.mlp_ratio},
              {"num_classes", tnt.num_classes},
              {"drop_path_rate", tnt.drop_path_rate}};
}

namespace {

template <typename V>
void take(const json& j, const char* key, V& out, std::set<std::string>& seen) {
  if (!j.contains(key)) return;
  seen.insert(key);
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model.") + key + ": " + e.what());
  }
}

}  // namespace

ModelSpec ModelSpec::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model: expected an object");
  ModelSpec spec;
  std::set<std::string> seen;
  if (j.contains("preset")) {
    if (!j.at("preset").is_string()) throw ConfigError("model.preset: expected a string");
    spec = preset(j.at("preset").get<std::string>());
    seen.insert("preset");
  }
  if (j.contains("arch")) {
    if (!j.at("arch").is_string()) throw ConfigError("model.arch: expected a string");
    const auto kind = parse_model_kind(j.at("arch").get<std::string>());
    if (seen.count("preset") && kind != spec.kind)
      throw ConfigError("model: arch '" + j.at("arch").get<std::string>() + "' contradicts the preset");
    spec.kind = kind;
    seen.insert("arch");
  } else if (!seen.count("preset")) {
    throw ConfigError("model: one of 'preset' or 'arch' is required");
  }
  if (spec.kind == ModelKind::Swin) {
    auto& c = spec.swin;
    take(j, "img_size", c.img_size, seen);
    take(j, "patch_size", c.patch_size, seen);
    take(j, "embed_dim", c.embed_dim, seen);
    take(j, "depths", c.depths, seen);
    take(j, "num_heads", c.num_heads, seen);
    take(j, "window_size", c.window_size, seen);
    take(j, "mlp_ratio", c.mlp_ratio, seen);
    take(j, "num_classes", c.num_classes, seen);
    take(j, "drop_path_rate", c.drop_path_rate, seen);
  } else {
    auto& c = spec.tnt;
    take(j, "img_size", c.img_size, seen);
    take(j, "sentence_patch", c.sentence_patch, seen);
    take(j, "word_patch", c.word_patch, seen);
    take(j, "outer_dim", c.outer_dim, seen);
    take(j, "inner_dim", c.inner_dim, seen);
    take(j, "depth", c.depth, seen);
    take(j, "outer_heads", c.outer_heads, seen);
    take(j, "inner_heads", c.inner_heads, seen);
    take(j, "mlp_ratio", c.mlp_ratio, seen);
    take(j, "num_classes", c.num_classes, seen);
    take(j, "drop_path_rate", c.drop_path_rate, seen);
  }
  for (const auto& item : j.items())
    if (!seen.count(item.key()))
      throw ConfigError("model: unknown field '" + item.key() + "' for " + model_kind_name(spec.kind));
  spec.validate();
  return spec;
}

template <typename T>
std::unique_ptr<Classifier<T>> make_classifier(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.kind == ModelKind::Swin) return std::make_unique<SwinModel<T>>(spec.swin, seed);
  return std::make_unique<TntModel<T>>(spec.tnt, seed);
}

template std::unique_ptr<Classifier<float>> make_classifier<float>(const ModelSpec&, std::uint64_t);
template std::unique_ptr<Classifier<double>> make_classifier<double>(const ModelSpec&, std::uint64_t);

}  // namespace cxr
