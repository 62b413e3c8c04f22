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

// Per-pixel adaptive convolution operators used to synthesize the middle
// frame from c reference frames.
//
// References are stacked as one [c,H,W] array. Output frames are [1,H,W].
// A kernel of odd length n is centred on the output pixel: tap a reads the
// reference at offset a - n/2. Patches that leave the frame read replicated
// edge pixels.
//
//   raw adaptive     I(x,y) = sum_t  W_t(x,y) . P_t(x,y)
//   factorized       W_t    = sum_i  Kv_t^i' * Kh_t^i          (rank i = 1..rank)
//   quality-gated    I^s    = sum_t  Q^s_t . (Kv' * Kh . P^s_t) + up2(I^{s/2})
//
// The factorized forms never build n x n kernels; each pixel evaluates the
// horizontal 1-D taps per patch row and weights those by the vertical taps.

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "fkinterp/array.hpp"
#include "fkinterp/tape.hpp"

namespace fkinterp {

/// Per-pixel n x n kernels, one [n*n,H,W] array per reference. Channel a*n+b
/// holds the tap at row offset a - n/2 and column offset b - n/2.
struct KernelField2D {
  std::size_t length = 0;
  std::vector<Array> kernels;

  std::size_t references() const { return kernels.size(); }
};

/// Rank-lambda factorized per-pixel kernels. For reference t, vertical[t] and
/// horizontal[t] are [rank*n,H,W]; channel i*n + a is tap a of rank term i.
struct FactorizedKernelField {
  std::size_t rank = 1;
  std::size_t length = 0;
  std::vector<Array> vertical;
  std::vector<Array> horizontal;

  std::size_t references() const { return vertical.size(); }
  std::size_t height() const { return vertical.at(0).dim(1); }
  std::size_t width() const { return vertical.at(0).dim(2); }

  /// Every tap equal to `value`.
  static FactorizedKernelField constant(std::size_t references, std::size_t rank, std::size_t length,
                                        std::size_t height, std::size_t width, double value);
  /// Rank-1 kernels with a single unit tap at the centre of both factors.
  static FactorizedKernelField delta(std::size_t references, std::size_t length, std::size_t height,
                                     std::size_t width);
};

/// Per-pixel per-reference gates Q^s, stored as [c,H,W]. Unnormalized.
using QualityField = Array;

/// Kernels and gates for one synthesis scale.
struct ScaleFields {
  FactorizedKernelField kernels;
  QualityField quality;
};

/// Synthesis scales, coarse to fine.
inline constexpr std::array<double, 3> kSynthesisScales{0.25, 0.5, 1.0};

/// Outputs of the three synthesis scales, each [1,h,w].
struct ScalePyramid {
  Array quarter;
  Array half;
  Array full;

  const Array& at(std::size_t level) const { return level == 0 ? quarter : level == 1 ? half : full; }
  Array& at(std::size_t level) { return level == 0 ? quarter : level == 1 ? half : full; }
};

// ---------------------------------------------------------------------------
// Raw adaptive convolution.

Array adaptive_conv(const Array& refs, const KernelField2D& kernels);

struct AdaptiveConvGrads {
  Array refs;
  std::vector<Array> kernels;
};
AdaptiveConvGrads adaptive_conv_backward(const Array& refs, const KernelField2D& kernels, const Array& grad_out);

// ---------------------------------------------------------------------------
// Kernel factorization.

struct KernelFactors {
  /// vertical[i], horizontal[i] are the length-n factors of rank term i.
  std::vector<std::vector<double>> vertical;
  std::vector<std::vector<double>> horizontal;
  /// All n singular values, descending.
  std::vector<double> singular_values;
};

/// Best rank-`rank` approximation of the row-major n x n kernel by singular
/// value decomposition. Factor i is scaled by sqrt(sigma_i) on both sides.
/// Throws DomainError when rank is 0 or exceeds n.
KernelFactors factorize_kernel(const std::vector<double>& kernel, std::size_t n, std::size_t rank);

/// sum_i vertical[i]' * horizontal[i] as a row-major n x n kernel.
std::vector<double> reconstruct_kernel(const KernelFactors& factors);

/// Factorizes every per-pixel kernel of a 2-D field.
FactorizedKernelField factorize_field(const KernelField2D& field, std::size_t rank);

/// Materializes sum_i Kv^i' * Kh^i per pixel (test and reference use).
KernelField2D expand_field(const FactorizedKernelField& field);

// ---------------------------------------------------------------------------
// Factorized convolution.

/// Unweighted per-reference responses R_t = (sum_i Kv^i' * Kh^i) . P_t, [c,H,W].
Array separable_responses(const Array& refs, const FactorizedKernelField& kernels);

struct SeparableGrads {
  Array refs;
  std::vector<Array> vertical;
  std::vector<Array> horizontal;
};
/// `grad_responses` is the [c,H,W] upstream gradient of separable_responses.
SeparableGrads separable_responses_backward(const Array& refs, const FactorizedKernelField& kernels,
                                            const Array& grad_responses);

/// sum over references of separable_responses.
Array factorized_conv(const Array& refs, const FactorizedKernelField& kernels);
SeparableGrads factorized_conv_backward(const Array& refs, const FactorizedKernelField& kernels,
                                        const Array& grad_out);

// ---------------------------------------------------------------------------
// Quality-gated synthesis at one scale.

/// sum_t Q_t . R_t + carry. `carry` is the upsampled coarser output, or an
/// all-zero [1,H,W] frame at the coarsest scale.
Array qa_fk_synthesize_scale(const Array& refs, const FactorizedKernelField& kernels, const QualityField& quality,
                             const Array& carry);

struct QaSynthesisGrads {
  Array refs;
  std::vector<Array> vertical;
  std::vector<Array> horizontal;
  Array quality;
  Array carry;
};
QaSynthesisGrads qa_fk_synthesize_scale_backward(const Array& refs, const FactorizedKernelField& kernels,
                                                 const QualityField& quality, const Array& grad_out);

/// Chains the three scales. `refs` is full resolution with H, W divisible by
/// 4; coarser references come from repeated bilinear halving.
ScalePyramid multiscale_synthesize(const Array& refs, const std::array<ScaleFields, 3>& fields);

/// Reference stack at each synthesis scale: {1/4, 1/2, 1}.
std::array<Array, 3> reference_pyramid(const Array& refs);

/// Contribution of each reference to the final full-resolution frame, [c,H,W].
/// The channels sum to multiscale_synthesize(...).full.
Array reference_contributions(const Array& refs, const std::array<ScaleFields, 3>& fields);

/// Per-pixel proportion of each reference in the final frame: contribution
/// divided by the synthesized frame. Pixels where |frame| < 1e-9 get 1/c.
Array weighting_maps(const Array& contributions);

// ---------------------------------------------------------------------------
// Tape integration.

struct TapeKernelField {
  std::size_t rank = 1;
  std::size_t length = 0;
  std::vector<VarId> vertical;
  std::vector<VarId> horizontal;
};

struct TapeScaleFields {
  TapeKernelField kernels;
  VarId quality = 0;
};

struct TapePyramid {
  std::array<VarId, 3> levels{};
};

VarId record_qa_fk_synthesize(Tape& tape, VarId refs, const TapeKernelField& kernels, VarId quality, VarId carry);
VarId record_factorized_conv(Tape& tape, VarId refs, const TapeKernelField& kernels);
TapePyramid record_multiscale_synthesize(Tape& tape, VarId refs, const std::array<TapeScaleFields, 3>& fields);

}  // namespace fkinterp
