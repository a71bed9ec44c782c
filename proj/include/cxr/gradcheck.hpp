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
#include <functional>
#include <string>
#include <vector>

#include "cxr/tensor.hpp"

namespace cxr {

/// Outcome of comparing backward() against central differences.
/// Error per component is |analytic - numeric| / max(1, |analytic|).
struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<tensor name>[<flat index>]"
};

using TensorFn = std::function<Tensor<double>(const Tensor<double>&)>;

/// Checks d f(x) / dx. A non-scalar f is reduced to a scalar by a fixed
/// pseudo-random weighting so the whole Jacobian participates.
/// eps must lie in [1e-6, 1e-3]. Runs in double precision only: single
/// precision finite differences are too noisy for a 1e-4 bound.
double gradcheck(const TensorFn& f, const Tensor<double>& x, double eps = 1e-6);

/// Checks a scalar loss against every listed parameter, perturbing the
/// parameters in place (they are restored afterwards). When
/// max_per_tensor > 0, a seeded random subset of that many components per
/// tensor is checked instead of all of them.
GradcheckReport gradcheck_params(const std::function<Tensor<double>()>& loss_fn,
                                 const std::vector<std::pair<std::string, Tensor<double>>>& params,
                                 double eps = 1e-6, std::size_t max_per_tensor = 0,
                                 std::uint64_t seed = 0);

}  // namespace cxr
