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

#include "cxr/gradcheck.hpp"
#include "cxr/model.hpp"

namespace cxr {

/// Gradient check of a whole model plus label-smoothed cross-entropy in
/// double precision, on a random batch of two images. Parameters are first
/// jittered by U(-0.2, 0.2) so zero-initialized biases and tables carry
/// signal. per_tensor = 0 checks every component.
GradcheckReport model_gradcheck(const ModelSpec& spec, std::uint64_t seed, std::size_t per_tensor = 16,
                                double eps = 1e-6);

}  // namespace cxr
