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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "fkinterp/adaptive_conv.hpp"
#include "fkinterp/array.hpp"
#include "fkinterp/tape.hpp"

namespace fkinterp {

/// The 8x8 Hadamard matrix in natural (Sylvester) order. Symmetric, entries
/// +-1, H * H' = 8 I. The transform is used unnormalized throughout.
inline constexpr std::array<std::array<int, 8>, 8> kHadamard8{{
    {1, 1, 1, 1, 1, 1, 1, 1},
    {1, -1, 1, -1, 1, -1, 1, -1},
    {1, 1, -1, -1, 1, 1, -1, -1},
    {1, -1, -1, 1, 1, -1, -1, 1},
    {1, 1, 1, 1, -1, -1, -1, -1},
    {1, -1, 1, -1, -1, 1, -1, 1},
    {1, 1, -1, -1, -1, -1, 1, 1},
    {1, -1, -1, 1, -1, 1, 1, -1},
}};

/// out = H * block * H for a row-major 8x8 block (fast butterflies).
template <typename T>
void hadamard8x8(const T* block, T* out);

/// Sum of |H * block * H| over one row-major 8x8 block.
double satd8x8(const double* block);
std::int64_t satd8x8(const std::int32_t* block);

enum class LossKind { kL1, kSatd };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct LossConfig {
  double alpha = 0.2;  // 1/4 scale
  double beta = 0.3;   // 1/2 scale
  double gamma = 0.5;  // full scale
  LossKind kind = LossKind::kSatd;
};

/// sum |pred - target|.
double l1_loss(const Array& pred, const Array& target);
/// d l1 / d pred: sign(pred - target), 0 at ties.
Array l1_loss_backward(const Array& pred, const Array& target);

/// Residue target - pred, split per channel into 8x8 blocks (zero padded to a
/// multiple of 8), each transformed as H * B * H; returns sum of |coefficients|.
double satd_loss(const Array& pred, const Array& target);
/// d satd / d pred. Subgradient 0 where a coefficient is exactly 0.
Array satd_loss_backward(const Array& pred, const Array& target);

double frame_loss(LossKind kind, const Array& pred, const Array& target);
Array frame_loss_backward(LossKind kind, const Array& pred, const Array& target);

/// Ground truth at scales {1/4, 1/2, 1} by repeated bilinear halving.
std::array<Array, 3> target_pyramid(const Array& target);

/// alpha * l(I^{1/4}) + beta * l(I^{1/2}) + gamma * l(I^1), l chosen by cfg.kind.
double multiscale_loss(const ScalePyramid& pyramid, const Array& target, const LossConfig& cfg);

/// Scalar [1] variable holding frame_loss(pred, target).
VarId record_frame_loss(Tape& tape, LossKind kind, VarId pred, const Array& target);
VarId record_multiscale_loss(Tape& tape, const TapePyramid& pyramid, const Array& target, const LossConfig& cfg);

}  // namespace fkinterp
