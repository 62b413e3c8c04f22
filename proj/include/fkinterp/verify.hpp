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

// Self-contained invariant suite behind `fkinterp verify`.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fkinterp {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  /// Fault injection: drop the second rank term from the factorized kernels
  /// before they are applied, as a broken kernel implementation would.
  bool skip_rank2 = false;
};

std::vector<CheckResult> run_invariant_checks(const VerifyOptions& options);

}  // namespace fkinterp
