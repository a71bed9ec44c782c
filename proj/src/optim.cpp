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

#include "cxr/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cxr/error.hpp"

namespace cxr {

void AdamWHyper::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("optimizer.lr must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optimizer.beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer.beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("optimizer.eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be >= 0");
}

void Schedule::validate() const {
  if (total_steps < 1) throw ConfigError("schedule: total_steps must be >= 1");
  if (warmup_steps < 0 || warmup_steps >= total_steps)
    throw ConfigError("schedule: warmup_steps " + std::to_string(warmup_steps) + " outside [0, " +
                      std::to_string(total_steps) + ")");
  if (!(min_lr >= 0.0) || !(warmup_start_lr >= 0.0)) throw ConfigError("schedule: rates must be >= 0");
  if (min_lr > base_lr) throw ConfigError("schedule: min_lr exceeds the base rate");
}

double lr_at(std::int64_t step, const Schedule& s) {
  if (step < 0 || step > s.total_steps)
    throw ConfigError("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(s.total_steps) + "]");
  if (step < s.warmup_steps)
    return s.warmup_start_lr +
           (s.base_lr - s.warmup_start_lr) * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  const double progress =
      static_cast<double>(step - s.warmup_steps) / static_cast<double>(s.total_steps - s.warmup_steps);
  return s.min_lr + 0.5 * (s.base_lr - s.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
void adamw_step(const ParamList<T>& params, OptState<T>& state, const AdamWHyper& hyper, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("adamw: learning rate must be finite and >= 0");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("adamw: state holds " + std::to_string(state.m.size()) + " buffers for " +
                     std::to_string(params.size()) + " parameters");
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (T g : p.tensor.grad())
      if (!std::isfinite(g)) throw NumericError("adamw: non-finite gradient in " + p.name + "; step rejected");
  }

  const auto t = state.step + 1;
  const double bias1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
  const auto decay = static_cast<T>(1.0 - lr * hyper.weight_decay);
  const auto b1 = static_cast<T>(hyper.beta1), b2 = static_cast<T>(hyper.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T> p = params[i].tensor;
    if (!p.has_grad()) continue;
    const auto grad = p.grad();
    auto theta = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.empty()) {
      m.assign(theta.size(), T(0));
      v.assign(theta.size(), T(0));
    }
    if (m.size() != theta.size() || v.size() != theta.size())
      throw ShapeError("adamw: moment buffers for " + params[i].name + " do not match its size");
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const T g = grad[k];
      theta[k] *= decay;
      m[k] = b1 * m[k] + (T(1) - b1) * g;
      v[k] = b2 * v[k] + (T(1) - b2) * g * g;
      const double m_hat = static_cast<double>(m[k]) / bias1;
      const double v_hat = static_cast<double>(v[k]) / bias2;
      theta[k] -= static_cast<T>(lr * m_hat / (std::sqrt(v_hat) + hyper.eps));
    }
  }
  state.step = t;
}

template <typename T>
Tensor<T> label_smoothed_ce(const Tensor<T>& logits, const std::vector<int>& targets, double eps) {
  if (logits.rank() != 2) throw ShapeError("label_smoothed_ce: expected [B, K] logits, got " + shape_str(logits.shape()));
  const Index b = logits.dim(0), k = logits.dim(1);
  if (k < 2) throw ShapeError("label_smoothed_ce: need at least 2 classes");
  if (static_cast<Index>(targets.size()) != b)
    throw ShapeError("label_smoothed_ce: " + std::to_string(targets.size()) + " targets for batch of " +
                     std::to_string(b));
  if (!(eps >= 0.0 && eps < 1.0)) throw ConfigError("label_smoothed_ce: eps must be in [0, 1)");
  for (int t : targets)
    if (t < 0 || t >= k) throw DataError("label_smoothed_ce: target " + std::to_string(t) + " outside [0, " +
                                         std::to_string(k) + ")");

  const auto& z = logits.data();
  std::vector<double> diff(static_cast<std::size_t>(b * k));  // softmax - q
  double loss = 0.0;
  for (Index i = 0; i < b; ++i) {
    const T* row = z.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double denom = 0.0;
    for (Index j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
    const double log_denom = std::log(denom);
    for (Index j = 0; j < k; ++j) {
      const double q = (j == targets[i] ? 1.0 - eps : 0.0) + eps / static_cast<double>(k);
      const double log_p = static_cast<double>(row[j]) - mx - log_denom;
      loss -= q * log_p;
      diff[i * k + j] = std::exp(log_p) - q;
    }
  }
  loss /= static_cast<double>(b);
  if (!std::isfinite(loss)) throw NumericError("label_smoothed_ce: non-finite loss");

  return make_result<T>(
      Shape{}, std::vector<T>{static_cast<T>(loss)}, {logits},
      [diff = std::move(diff), b](detail::Node<T>& self) {
        auto& in = self.inputs[0];
        if (!in->requires_grad) return;
        auto& g = in->ensure_grad();
        const double scale = static_cast<double>(self.grad[0]) / static_cast<double>(b);
        for (std::size_t i = 0; i < diff.size(); ++i) g[i] += static_cast<T>(diff[i] * scale);
      },
      "label_smoothed_ce");
}

template void adamw_step<float>(const ParamList<float>&, OptState<float>&, const AdamWHyper&, double);
template void adamw_step<double>(const ParamList<double>&, OptState<double>&, const AdamWHyper&, double);
template Tensor<float> label_smoothed_ce<float>(const Tensor<float>&, const std::vector<int>&, double);
template Tensor<double> label_smoothed_ce<double>(const Tensor<double>&, const std::vector<int>&, double);

}  // namespace cxr
