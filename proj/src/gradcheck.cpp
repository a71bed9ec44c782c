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

#include "cxr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cxr/error.hpp"
#include "cxr/ops.hpp"
#include "cxr/rng.hpp"

namespace cxr {

namespace {

void check_eps(double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) throw std::invalid_argument("gradcheck: eps must lie in [1e-6, 1e-3]");
}

double finite_or_throw(double v, const std::string& where) {
  if (!std::isfinite(v)) throw NumericError("gradcheck: non-finite value at " + where);
  return v;
}

Tensor<double> reduce_to_scalar(const Tensor<double>& y) {
  if (y.numel() == 1) return y;
  Rng rng(0x5EED);
  std::vector<double> w(static_cast<std::size_t>(y.numel()));
  for (auto& v : w) v = rng.uniform(0.5, 1.5);
  return sum(mul(y, Tensor<double>(y.shape(), std::move(w))));
}

}  // namespace

double gradcheck(const TensorFn& f, const Tensor<double>& x, double eps) {
  check_eps(eps);
  Tensor<double> probe(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
  backward(reduce_to_scalar(f(probe)));
  std::vector<double> analytic(static_cast<std::size_t>(x.numel()), 0.0);
  if (probe.has_grad()) std::copy(probe.grad().begin(), probe.grad().end(), analytic.begin());

  NoGradGuard no_grad;
  double worst = 0.0;
  auto data = probe.mutable_data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string where = "x[" + std::to_string(i) + "]";
    finite_or_throw(analytic[i], where + " (analytic)");
    const double saved = data[i];
    data[i] = saved + eps;
    const double up = finite_or_throw(reduce_to_scalar(f(probe)).item(), where);
    data[i] = saved - eps;
    const double down = finite_or_throw(reduce_to_scalar(f(probe)).item(), where);
    data[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

GradcheckReport gradcheck_params(const std::function<Tensor<double>()>& loss_fn,
                                 const std::vector<std::pair<std::string, Tensor<double>>>& params,
                                 double eps, std::size_t max_per_tensor, std::uint64_t seed) {
  check_eps(eps);
  auto tensors = params;
  for (auto& [name, t] : tensors) {
    t.zero_grad();
    if (!t.requires_grad()) throw std::invalid_argument("gradcheck_params: " + name + " does not require grad");
  }
  Tensor<double> loss = loss_fn();
  if (loss.numel() != 1) throw ShapeError("gradcheck_params: loss must be scalar");
  backward(loss);

  GradcheckReport report;
  Rng rng(seed);
  NoGradGuard no_grad;
  for (auto& [name, t] : tensors) {
    std::vector<double> analytic(static_cast<std::size_t>(t.numel()), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    std::vector<std::size_t> which;
    if (max_per_tensor == 0 || max_per_tensor >= analytic.size()) {
      which.resize(analytic.size());
      for (std::size_t i = 0; i < which.size(); ++i) which[i] = i;
    } else {
      auto perm = rng.permutation(analytic.size());
      which.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(max_per_tensor));
    }
    auto data = t.mutable_data();
    for (std::size_t i : which) {
      const std::string where = name + "[" + std::to_string(i) + "]";
      finite_or_throw(analytic[i], where + " (analytic)");
      const double saved = data[i];
      data[i] = saved + eps;
      const double up = finite_or_throw(loss_fn().item(), where);
      data[i] = saved - eps;
      const double down = finite_or_throw(loss_fn().item(), where);
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      ++report.checked;
      if (err > report.max_rel_error || report.worst.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        if (err >= report.max_rel_error) report.worst = where;
      }
    }
    t.zero_grad();
  }
  return report;
}

}  // namespace cxr
