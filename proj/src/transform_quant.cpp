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

#include "fkinterp/transform_quant.hpp"

#include <algorithm>
#include <cmath>

#include "fkinterp/error.hpp"
#include "fkinterp/losses.hpp"

namespace fkinterp {

double quant_step(int qp) {
  if (qp < 0 || qp > 51) throw DomainError("QP " + std::to_string(qp) + " outside [0, 51]");
  return std::exp2((qp - 4) / 6.0);
}

void quantize_block8(const double* residue, double qstep, std::int32_t* levels) {
  double c[64];
  hadamard8x8(residue, c);
  for (int i = 0; i < 64; ++i) levels[i] = static_cast<std::int32_t>(std::lround(c[i] / qstep));
}

void dequantize_block8(const std::int32_t* levels, double qstep, double* residue) {
  double c[64];
  for (int i = 0; i < 64; ++i) c[i] = levels[i] * qstep;
  hadamard8x8(c, residue);
  for (int i = 0; i < 64; ++i) residue[i] /= 64.0;
}

Array degrade_compress_proxy(const Array& frame, int qp) {
  require_rank3(frame, "degrade_compress_proxy");
  const double qstep = quant_step(qp);
  const std::size_t ch = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
  Array out = Array::like(frame);
  double blk[64], rec[64];
  std::int32_t lv[64];
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t by = 0; by < h; by += 8) {
      for (std::size_t bx = 0; bx < w; bx += 8) {
        for (std::size_t y = 0; y < 8; ++y) {
          const std::size_t sy = std::min(by + y, h - 1);
          for (std::size_t x = 0; x < 8; ++x) blk[y * 8 + x] = frame.at(c, sy, std::min(bx + x, w - 1));
        }
        quantize_block8(blk, qstep, lv);
        dequantize_block8(lv, qstep, rec);
        for (std::size_t y = 0; y < 8 && by + y < h; ++y) {
          for (std::size_t x = 0; x < 8 && bx + x < w; ++x) {
            out.at(c, by + y, bx + x) = std::clamp(std::round(rec[y * 8 + x]), 0.0, 255.0);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace fkinterp
