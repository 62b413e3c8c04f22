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

// Differentiable building blocks of the interpolation network. Every op is a
// pure function with a hand-written backward companion taking the upstream
// gradient and returning gradients with respect to each input.
//
// Boundary convention: all spatial ops replicate edge pixels.

#pragma once

#include <cstddef>

#include "fkinterp/array.hpp"

namespace fkinterp::ops {

struct Conv2dGrads {
  Array input;
  Array weights;
  Array bias;
};

/// 3x3 cross-correlation with replicate padding of one pixel.
/// input [Ci,H,W], weights [Co,Ci,3,3], bias [Co] -> [Co,H,W].
Array conv2d_3x3(const Array& input, const Array& weights, const Array& bias);
Conv2dGrads conv2d_3x3_backward(const Array& input, const Array& weights, const Array& grad_out);

/// max(0, x). The subgradient at exactly 0 is 0.
Array relu(const Array& input);
Array relu_backward(const Array& input, const Array& grad_out);

/// Non-overlapping 2x2 mean, [C,H,W] -> [C,H/2,W/2]. H and W must be even.
Array avg_pool2(const Array& input);
Array avg_pool2_backward(const Array& grad_out);

/// Bilinear x2 upsampling with half-pixel centres (align_corners = false):
/// output sample i reads source position (i + 0.5) / 2 - 0.5, clamped to the
/// valid range. Even outputs blend 3/4 of source k with 1/4 of k-1, odd
/// outputs 3/4 of k with 1/4 of k+1.
Array upsample_bilinear2(const Array& input);
Array upsample_bilinear2_backward(const Array& grad_out);

/// Bilinear x1/2 resampling. With half-pixel centres every output sample sits
/// exactly between four source pixels, so this equals avg_pool2.
inline Array downscale_half(const Array& input) { return avg_pool2(input); }

struct Margins {
  std::size_t top = 0;
  std::size_t bottom = 0;
  std::size_t left = 0;
  std::size_t right = 0;

  static Margins uniform(std::size_t m) { return {m, m, m, m}; }
};

Array pad_replicate(const Array& input, Margins margins);
/// Folds the gradient of the padded border back onto the edge pixels.
Array pad_replicate_backward(const Array& grad_out, Margins margins);

/// Inverse of padding: drops `margins` from each side.
Array crop(const Array& input, Margins margins);
Array crop_backward(const Array& grad_out, Margins margins);

}  // namespace fkinterp::ops
