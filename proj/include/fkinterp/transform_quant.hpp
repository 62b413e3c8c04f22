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

// 8x8 Hadamard transform coding shared by the training-data degradation and
// the codec simulator.
//
// Forward:  C = H * B * H          (unnormalized, C is integer for integer B)
// Quantize: L = round(C / Qstep),  Qstep = 2^((QP - 4) / 6)
// Inverse:  B' = H * (L * Qstep) * H / 64
//
// With Qstep = 1 (QP 4) integer blocks are reproduced exactly; for QP < 4 the
// per-coefficient error is below 1/2, hence below 1/2 per sample after the
// inverse.

#pragma once

#include <cstdint>

#include "fkinterp/array.hpp"

namespace fkinterp {

/// 2^((qp - 4) / 6); throws DomainError outside [0, 51].
double quant_step(int qp);

/// levels = round(H * residue * H / qstep), half away from zero.
void quantize_block8(const double* residue, double qstep, std::int32_t* levels);
/// H * (levels * qstep) * H / 64.
void dequantize_block8(const std::int32_t* levels, double qstep, double* residue);

/// Transform-codes every 8x8 block of every channel of a [C,H,W] frame at the
/// given QP and returns the rounded, 0..255-clipped reconstruction. Partial
/// border blocks are completed by edge replication before the transform.
Array degrade_compress_proxy(const Array& frame, int qp);

}  // namespace fkinterp
