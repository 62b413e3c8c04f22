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

#include "fkinterp/motion.hpp"

#include <cmath>
#include <cstdlib>

#include "fkinterp/error.hpp"
#include "fkinterp/losses.hpp"
#include "fkinterp/ops.hpp"

namespace fkinterp {

std::string_view to_string(MatchMetric m) { return m == MatchMetric::kSad ? "sad" : "satd"; }

double block_cost(const Array& current, const Array& reference, const BlockRect& b, MotionVector mv,
                  MatchMetric metric) {
  const long ry = static_cast<long>(b.y) + mv.dy, rx = static_cast<long>(b.x) + mv.dx;
  const std::size_t w = current.dim(2);
  if (metric == MatchMetric::kSad) {
    double s = 0.0;
    for (std::size_t y = 0; y < b.height; ++y) {
      for (std::size_t x = 0; x < b.width; ++x) {
        s += std::abs(current[(b.y + y) * w + b.x + x] -
                      sample_clamped(reference, ry + static_cast<long>(y), rx + static_cast<long>(x)));
      }
    }
    return s;
  }
  if (b.height % 8 != 0 || b.width % 8 != 0) throw DomainError("block_cost: SATD needs multiple-of-8 blocks");
  double s = 0.0;
  double r[64];
  for (std::size_t by = 0; by < b.height; by += 8) {
    for (std::size_t bx = 0; bx < b.width; bx += 8) {
      for (std::size_t y = 0; y < 8; ++y) {
        for (std::size_t x = 0; x < 8; ++x) {
          const long yy = static_cast<long>(by + y), xx = static_cast<long>(bx + x);
          r[y * 8 + x] = current[(b.y + by + y) * w + b.x + bx + x] - sample_clamped(reference, ry + yy, rx + xx);
        }
      }
      s += satd8x8(r);
    }
  }
  return s;
}

namespace {

// Cost against a reference already padded by `pad` on every side, so every
// displaced sample is read directly.
double padded_cost(const Array& current, const Array& padded, std::size_t pad, const BlockRect& b, MotionVector mv,
                   MatchMetric metric) {
  const std::size_t w = current.dim(2), pw = padded.dim(2);
  const double* cur = current.data();
  const long oy = static_cast<long>(b.y + pad) + mv.dy, ox = static_cast<long>(b.x + pad) + mv.dx;
  const double* base = padded.data() + static_cast<std::size_t>(oy) * pw + static_cast<std::size_t>(ox);
  if (metric == MatchMetric::kSad) {
    double s = 0.0;
    for (std::size_t y = 0; y < b.height; ++y) {
      const double* c = cur + (b.y + y) * w + b.x;
      const double* r = base + y * pw;
      for (std::size_t x = 0; x < b.width; ++x) s += std::abs(c[x] - r[x]);
    }
    return s;
  }
  double s = 0.0;
  double blk[64];
  for (std::size_t by = 0; by < b.height; by += 8) {
    for (std::size_t bx = 0; bx < b.width; bx += 8) {
      for (std::size_t y = 0; y < 8; ++y) {
        const double* c = cur + (b.y + by + y) * w + b.x + bx;
        const double* r = base + (by + y) * pw + bx;
        for (std::size_t x = 0; x < 8; ++x) blk[y * 8 + x] = c[x] - r[x];
      }
      s += satd8x8(blk);
    }
  }
  return s;
}

}  // namespace

MotionResult motion_search(const Array& current, const Array& reference, const BlockRect& block, int range,
                           MatchMetric metric) {
  require_rank3(current, "motion_search");
  require_same_shape(current, reference, "motion_search");
  if (block.height == 0 || block.width == 0 || block.y + block.height > current.dim(1) ||
      block.x + block.width > current.dim(2)) {
    throw DomainError("motion_search: block lies outside the frame");
  }
  if (range < 0) throw DomainError("motion_search: negative search range");
  if (metric == MatchMetric::kSatd && (block.height % 8 != 0 || block.width % 8 != 0)) {
    throw DomainError("motion_search: SATD needs multiple-of-8 blocks");
  }
  const std::size_t pad = static_cast<std::size_t>(range);
  const Array padded = pad == 0 ? reference : ops::pad_replicate(reference, ops::Margins::uniform(pad));
  MotionResult best{{0, 0}, padded_cost(current, padded, pad, block, {0, 0}, metric)};
  for (int dy = -range; dy <= range; ++dy) {
    for (int dx = -range; dx <= range; ++dx) {
      const double c = padded_cost(current, padded, pad, block, {dx, dy}, metric);
      const int len = std::abs(dx) + std::abs(dy), best_len = std::abs(best.mv.dx) + std::abs(best.mv.dy);
      // Candidates are scanned in raster order, so keeping the incumbent on a
      // full tie keeps the earlier one.
      if (c < best.cost || (c == best.cost && len < best_len)) best = {{dx, dy}, c};
    }
  }
  return best;
}

double mean_block_displacement(const Array& from, const Array& to, std::size_t block_size, int range) {
  require_rank3(from, "mean_block_displacement");
  const std::size_t bh = from.dim(1) / block_size, bw = from.dim(2) / block_size;
  if (bh == 0 || bw == 0) throw DomainError("mean_block_displacement: frame smaller than one block");
  double total = 0.0;
  for (std::size_t i = 0; i < bh; ++i) {
    for (std::size_t j = 0; j < bw; ++j) {
      const MotionResult r =
          motion_search(from, to, {i * block_size, j * block_size, block_size, block_size}, range, MatchMetric::kSad);
      total += std::hypot(r.mv.dx, r.mv.dy);
    }
  }
  return total / static_cast<double>(bh * bw);
}

}  // namespace fkinterp
