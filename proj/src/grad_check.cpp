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

#include "fkinterp/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fkinterp/error.hpp"

namespace fkinterp {

double GradCheckReport::worst() const {
  double w = 0.0;
  for (double e : max_rel_error) w = std::max(w, e);
  return w;
}

GradCheckReport grad_check(const ScalarFunction& f, const GradientFunction& gradient, std::vector<Array> inputs,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = options.tolerance;
  report.max_rel_error.assign(inputs.size(), 0.0);

  for (const Array& a : inputs) report.finite = report.finite && a.all_finite();
  std::vector<Array> analytic;
  if (report.finite) {
    analytic = gradient(inputs);
    if (analytic.size() != inputs.size()) throw ShapeError("grad_check: gradient count does not match inputs");
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      require_same_shape(analytic[k], inputs[k], "grad_check analytic gradient");
      report.finite = report.finite && analytic[k].all_finite();
    }
  }
  if (!report.finite) {
    std::fill(report.max_rel_error.begin(), report.max_rel_error.end(), INFINITY);
    return report;
  }

  std::mt19937_64 rng(options.seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (k < options.skip.size() && options.skip[k]) continue;
    std::vector<std::size_t> entries(inputs[k].size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries != 0 && entries.size() > options.max_entries) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries);
    }
    double max_diff = 0.0, scale = 0.0;
    for (std::size_t i : entries) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + options.step;
      const double up = f(inputs);
      inputs[k][i] = saved - options.step;
      const double down = f(inputs);
      inputs[k][i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      if (!std::isfinite(numeric)) {
        report.finite = false;
        report.max_rel_error[k] = INFINITY;
        break;
      }
      max_diff = std::max(max_diff, std::abs(numeric - analytic[k][i]));
      scale = std::max({scale, std::abs(numeric), std::abs(analytic[k][i])});
    }
    if (std::isfinite(report.max_rel_error[k])) report.max_rel_error[k] = scale > 0.0 ? max_diff / scale : max_diff;
  }
  report.passed = report.finite && report.worst() < options.tolerance;
  return report;
}

GradCheckReport grad_check_op(const ArrayFunction& op, const VjpFunction& vjp, std::vector<Array> inputs,
                              const GradCheckOptions& options) {
  const Array probe = op(inputs);
  Array cotangent = Array::like(probe);
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (double& v : cotangent.values()) v = dist(rng);

  const ScalarFunction f = [&](const std::vector<Array>& in) {
    const Array y = op(in);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += cotangent[i] * y[i];
    return s;
  };
  const GradientFunction g = [&](const std::vector<Array>& in) { return vjp(in, cotangent); };
  return grad_check(f, g, std::move(inputs), options);
}

}  // namespace fkinterp
