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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "fkinterp/array.hpp"

namespace fkinterp {

using ScalarFunction = std::function<double(const std::vector<Array>& inputs)>;
using GradientFunction = std::function<std::vector<Array>(const std::vector<Array>& inputs)>;
using ArrayFunction = std::function<Array(const std::vector<Array>& inputs)>;
/// Vector-Jacobian product: gradients of <grad_out, f(inputs)> w.r.t. each input.
using VjpFunction = std::function<std::vector<Array>(const std::vector<Array>& inputs, const Array& grad_out)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-6;
  /// Probe at most this many entries per input (chosen at random); 0 probes all.
  std::size_t max_entries = 0;
  std::uint64_t seed = 1;
  /// Inputs to skip (e.g. integer-like or constant inputs). Empty checks all.
  std::vector<bool> skip;
};

struct GradCheckReport {
  /// Per input: max |analytic - numeric| over probed entries, divided by the
  /// largest magnitude among the probed analytic and numeric entries.
  std::vector<double> max_rel_error;
  bool finite = true;
  bool passed = false;
  double tolerance = 0.0;

  double worst() const;
};

/// Compares `gradient` against central differences of the scalar `f`.
GradCheckReport grad_check(const ScalarFunction& f, const GradientFunction& gradient, std::vector<Array> inputs,
                           const GradCheckOptions& options = {});

/// Checks an array-valued op by projecting its output onto a fixed random
/// cotangent r: the scalar is sum(r * op(inputs)) and the analytic gradient
/// is vjp(inputs, r).
GradCheckReport grad_check_op(const ArrayFunction& op, const VjpFunction& vjp, std::vector<Array> inputs,
                              const GradCheckOptions& options = {});

}  // namespace fkinterp
