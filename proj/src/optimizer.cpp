// Copyright 2026 The fkinterp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fkinterp/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "fkinterp/error.hpp"

namespace fkinterp {

AdamaxState AdamaxState::zeros_like(const Parameters& params) {
  AdamaxState s;
  for (const NamedArray& e : params.entries()) {
    s.m.push_back(Array::like(e.value));
    s.u.push_back(Array::like(e.value));
  }
  return s;
}

void adamax_step(Parameters& params, const std::vector<Array>& grads, AdamaxState& state, double lr,
                 const AdamaxConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.u.size() != params.size()) {
    throw ShapeError("adamax_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i], grads[i], "adamax_step gradient");
    require_same_shape(params[i], state.m[i], "adamax_step first moment");
    require_same_shape(params[i], state.u[i], "adamax_step accumulator");
    if (!grads[i].all_finite()) throw NumericError("adamax_step: non-finite gradient for " + params.name(i));
  }
  ++state.t;
  const double step = lr / (1.0 - std::pow(cfg.beta1, static_cast<double>(state.t)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i].data();
    double* m = state.m[i].data();
    double* u = state.u[i].data();
    const double* g = grads[i].data();
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      u[k] = std::max(cfg.beta2 * u[k], std::abs(g[k]));
      p[k] -= step * m[k] / std::max(u[k], cfg.epsilon);
    }
  }
}

}  // namespace fkinterp
