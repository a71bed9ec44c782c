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
#include <vector>

#include "cxr/nn.hpp"

namespace cxr {

struct AdamWHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;

  /// lr may be 0 (a frozen run); betas in [0, 1); eps > 0; weight_decay >= 0.
  void validate() const;
};

/// Linear warmup from warmup_start_lr to base_lr over warmup_steps, then a
/// half cosine from base_lr down to min_lr at total_steps.
struct Schedule {
  std::int64_t warmup_steps = 0;
  std::int64_t total_steps = 1;
  double base_lr = 1e-3;
  double min_lr = 1e-6;
  double warmup_start_lr = 1e-6;

  void validate() const;
};

/// Defined for 0 <= step <= total_steps; continuous at step == warmup_steps.
double lr_at(std::int64_t step, const Schedule& schedule);

template <typename T>
struct OptState {
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;  // one buffer per parameter, same length
  std::vector<std::vector<T>> v;
};

/// One AdamW update over `params` using their accumulated gradients.
///
///   θ ← θ·(1 − lr·wd)
///   m ← β1·m + (1−β1)·g,   v ← β2·v + (1−β2)·g²
///   θ ← θ − lr·m̂ / (√v̂ + eps),   m̂ = m/(1−β1ᵗ), v̂ = v/(1−β2ᵗ)
///
/// Parameters without a gradient are left untouched. If any gradient holds a
/// non-finite value, NumericError names it and nothing is modified.
template <typename T>
void adamw_step(const ParamList<T>& params, OptState<T>& state, const AdamWHyper& hyper, double lr);

/// Mean over the batch of the cross-entropy between softmax(logits) and
/// q = (1 − eps)·onehot(target) + eps/K. Backward is (softmax − q) / B.
template <typename T>
Tensor<T> label_smoothed_ce(const Tensor<T>& logits, const std::vector<int>& targets, double eps);

}  // namespace cxr
