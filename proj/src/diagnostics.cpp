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

#include "cxr/diagnostics.hpp"

#include "cxr/optim.hpp"

namespace cxr {

GradcheckReport model_gradcheck(const ModelSpec& spec, std::uint64_t seed, std::size_t per_tensor, double eps) {
  spec.validate();
  const auto model = make_classifier<double>(spec, seed);
  Rng rng = Rng::derive(seed, {7});
  std::vector<std::pair<std::string, Tensor<double>>> params;
  for (const auto& p : model->parameters()) {
    Tensor<double> t = p.tensor;
    for (auto& v : t.mutable_data()) v += rng.uniform(-0.2, 0.2);
    params.emplace_back(p.name, t);
  }
  const Index s = spec.input_size();
  std::vector<double> pixels(static_cast<std::size_t>(2 * 3 * s * s));
  for (auto& v : pixels) v = rng.normal();
  const Tensor<double> images(Shape{2, 3, s, s}, std::move(pixels));
  const std::vector<int> targets{0, (spec.num_classes() - 1)};
  return gradcheck_params([&] { return label_smoothed_ce(model->forward(images), targets, 0.1); }, params, eps,
                          per_tensor, seed);
}

}  // namespace cxr
