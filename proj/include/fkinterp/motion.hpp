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
#include <string_view>

#include "fkinterp/array.hpp"

namespace fkinterp {

enum class MatchMetric { kSad, kSatd };

std::string_view to_string(MatchMetric m);

struct MotionVector {
  int dx = 0;
  int dy = 0;
  bool operator==(const MotionVector&) const = default;
};

struct BlockRect {
  std::size_t y = 0, x = 0, height = 0, width = 0;
};

struct MotionResult {
  MotionVector mv;
  double cost = 0.0;
};

/// Sample of channel 0 at (y, x), with coordinates clamped into the plane.
inline double sample_clamped(const Array& plane, long y, long x) {
  const long h = static_cast<long>(plane.dim(1)), w = static_cast<long>(plane.dim(2));
  y = y < 0 ? 0 : (y >= h ? h - 1 : y);
  x = x < 0 ? 0 : (x >= w ? w - 1 : x);
  return plane[static_cast<std::size_t>(y * w + x)];
}

/// Matching cost of `block` in `current` against `reference` displaced by
/// `mv`. Reference samples outside the frame repeat the nearest edge sample.
/// SATD sums the 8x8 Hadamard SATD of every 8x8 sub-block and requires block
/// extents that are multiples of 8.
double block_cost(const Array& current, const Array& reference, const BlockRect& block, MotionVector mv,
                  MatchMetric metric);

/// Exhaustive integer search over [-range, range]^2. Ties go to the smaller
/// |dx| + |dy|, then to the earlier candidate in raster order (dy, then dx,
/// ascending). Throws DomainError if the block is not inside `current`.
MotionResult motion_search(const Array& current, const Array& reference, const BlockRect& block, int range,
                           MatchMetric metric);

/// Mean Euclidean length of the SAD motion vectors of the non-overlapping
/// `block_size` blocks tiling `from`, searched in `to` over +-range.
double mean_block_displacement(const Array& from, const Array& to, std::size_t block_size, int range);

}  // namespace fkinterp
