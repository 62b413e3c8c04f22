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

#include "fkinterp/losses.hpp"

#include <cmath>
#include <cstdlib>

#include "fkinterp/error.hpp"
#include "fkinterp/ops.hpp"

namespace fkinterp {
namespace {

template <typename T>
inline void butterfly8(T* v, std::size_t stride) {
  // Natural-order Walsh-Hadamard: element pairs at distance 1, 2, 4.
  for (std::size_t half = 1; half < 8; half <<= 1) {
    for (std::size_t i = 0; i < 8; i += 2 * half) {
      for (std::size_t j = i; j < i + half; ++j) {
        const T a = v[j * stride], b = v[(j + half) * stride];
        v[j * stride] = a + b;
        v[(j + half) * stride] = a - b;
      }
    }
  }
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_pair(const Array& pred, const Array& target, std::string_view what) {
  require_same_shape(pred, target, what);
  require_rank3(pred, what);
}

// Copies channel c's 8x8 block at (by,bx) of `a` into `blk`, zero outside.
void load_block(const Array& a, std::size_t c, std::size_t by, std::size_t bx, double* blk) {
  const std::size_t h = a.dim(1), w = a.dim(2);
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t x = 0; x < 8; ++x) {
      const std::size_t sy = by * 8 + y, sx = bx * 8 + x;
      blk[y * 8 + x] = (sy < h && sx < w) ? a.at(c, sy, sx) : 0.0;
    }
  }
}

}  // namespace

template <typename T>
void hadamard8x8(const T* block, T* out) {
  for (std::size_t i = 0; i < 64; ++i) out[i] = block[i];
  for (std::size_t r = 0; r < 8; ++r) butterfly8(out + r * 8, 1);
  for (std::size_t c = 0; c < 8; ++c) butterfly8(out + c, 8);
}

template void hadamard8x8<double>(const double*, double*);
template void hadamard8x8<std::int32_t>(const std::int32_t*, std::int32_t*);

double satd8x8(const double* block) {
  double t[64];
  hadamard8x8(block, t);
  double s = 0.0;
  for (double v : t) s += std::abs(v);
  return s;
}

std::int64_t satd8x8(const std::int32_t* block) {
  std::int32_t t[64];
  hadamard8x8(block, t);
  std::int64_t s = 0;
  for (std::int32_t v : t) s += std::abs(v);
  return s;
}

std::string_view to_string(LossKind kind) { return kind == LossKind::kL1 ? "l1" : "satd"; }

LossKind parse_loss_kind(std::string_view name) {
  if (name == "l1") return LossKind::kL1;
  if (name == "satd") return LossKind::kSatd;
  throw DomainError("unknown loss '" + std::string(name) + "', expected l1 or satd");
}

double l1_loss(const Array& pred, const Array& target) {
  require_same_shape(pred, target, "l1_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
  return s;
}

Array l1_loss_backward(const Array& pred, const Array& target) {
  require_same_shape(pred, target, "l1_loss_backward");
  Array g = Array::like(pred);
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = sign(pred[i] - target[i]);
  return g;
}

double satd_loss(const Array& pred, const Array& target) {
  check_pair(pred, target, "satd_loss");
  const std::size_t c = pred.dim(0), bh = (pred.dim(1) + 7) / 8, bw = (pred.dim(2) + 7) / 8;
  double total = 0.0;
  double rp[64], rt[64];
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t by = 0; by < bh; ++by) {
      for (std::size_t bx = 0; bx < bw; ++bx) {
        load_block(target, k, by, bx, rt);
        load_block(pred, k, by, bx, rp);
        for (std::size_t i = 0; i < 64; ++i) rt[i] -= rp[i];
        total += satd8x8(rt);
      }
    }
  }
  return total;
}

Array satd_loss_backward(const Array& pred, const Array& target) {
  check_pair(pred, target, "satd_loss_backward");
  const std::size_t c = pred.dim(0), h = pred.dim(1), w = pred.dim(2), bh = (h + 7) / 8, bw = (w + 7) / 8;
  Array g = Array::like(pred);
  double rp[64], rt[64], coef[64], back[64];
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t by = 0; by < bh; ++by) {
      for (std::size_t bx = 0; bx < bw; ++bx) {
        load_block(target, k, by, bx, rt);
        load_block(pred, k, by, bx, rp);
        for (std::size_t i = 0; i < 64; ++i) rt[i] -= rp[i];
        hadamard8x8(rt, coef);
        for (double& v : coef) v = sign(v);
        // d/dB sum|H B H| = H sign(H B H) H; the residue is target - pred.
        hadamard8x8(coef, back);
        for (std::size_t y = 0; y < 8; ++y) {
          for (std::size_t x = 0; x < 8; ++x) {
            const std::size_t sy = by * 8 + y, sx = bx * 8 + x;
            if (sy < h && sx < w) g.at(k, sy, sx) = -back[y * 8 + x];
          }
        }
      }
    }
  }
  return g;
}

double frame_loss(LossKind kind, const Array& pred, const Array& target) {
  return kind == LossKind::kL1 ? l1_loss(pred, target) : satd_loss(pred, target);
}

Array frame_loss_backward(LossKind kind, const Array& pred, const Array& target) {
  return kind == LossKind::kL1 ? l1_loss_backward(pred, target) : satd_loss_backward(pred, target);
}

std::array<Array, 3> target_pyramid(const Array& target) {
  require_rank3(target, "target_pyramid");
  if (target.dim(1) % 4 != 0 || target.dim(2) % 4 != 0) {
    throw ShapeError("target_pyramid: dimensions must be divisible by 4, got " + shape_to_string(target.shape()));
  }
  Array half = ops::downscale_half(target);
  Array quarter = ops::downscale_half(half);
  return {std::move(quarter), std::move(half), target};
}

double multiscale_loss(const ScalePyramid& pyramid, const Array& target, const LossConfig& cfg) {
  const std::array<Array, 3> t = target_pyramid(target);
  return cfg.alpha * frame_loss(cfg.kind, pyramid.quarter, t[0]) +
         cfg.beta * frame_loss(cfg.kind, pyramid.half, t[1]) + cfg.gamma * frame_loss(cfg.kind, pyramid.full, t[2]);
}

VarId record_frame_loss(Tape& tape, LossKind kind, VarId pred, const Array& target) {
  return tape.record(
      kind == LossKind::kL1 ? "l1_loss" : "satd_loss", {pred},
      [kind, target](Tape::Inputs in) { return Array({1}, frame_loss(kind, *in[0], target)); },
      [kind, target](Tape::Inputs in, const Array&, const Array& g) {
        return std::vector<Array>{frame_loss_backward(kind, *in[0], target) * g[0]};
      });
}

VarId record_multiscale_loss(Tape& tape, const TapePyramid& pyramid, const Array& target, const LossConfig& cfg) {
  const std::array<Array, 3> t = target_pyramid(target);
  std::vector<VarId> terms;
  for (std::size_t s = 0; s < 3; ++s) terms.push_back(record_frame_loss(tape, cfg.kind, pyramid.levels[s], t[s]));
  return tape.weighted_sum(std::move(terms), {cfg.alpha, cfg.beta, cfg.gamma});
}

}  // namespace fkinterp
