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

#include <cstdint>
#include <vector>

#include "fkinterp/array.hpp"
#include "fkinterp/interp_net.hpp"

namespace fkinterp {

struct AdamaxConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  /// Lower bound applied to the infinity-norm accumulator before dividing.
  double epsilon = 1e-8;
};

/// Per-parameter moments, aligned with Parameters entries.
struct AdamaxState {
  std::vector<Array> m;
  std::vector<Array> u;
  std::uint64_t t = 0;

  static AdamaxState zeros_like(const Parameters& params);
  bool operator==(const AdamaxState&) const = default;
};

/// One AdaMax update:
///   m <- b1 m + (1 - b1) g
///   u <- max(b2 u, |g|)
///   theta <- theta - lr / (1 - b1^t) * m / max(u, eps)
/// Throws NumericError before touching anything if a gradient is not finite,
/// ShapeError if shapes disagree.
void adamax_step(Parameters& params, const std::vector<Array>& grads, AdamaxState& state, double lr,
                 const AdamaxConfig& cfg = {});

}  // namespace fkinterp
