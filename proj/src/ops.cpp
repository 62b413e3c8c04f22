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

#include "fkinterp/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <string>

#include "fkinterp/error.hpp"

namespace fkinterp::ops {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

inline std::size_t clamp_index(long v, std::size_t n) {
  if (v < 0) return 0;
  if (v >= static_cast<long>(n)) return n - 1;
  return static_cast<std::size_t>(v);
}

// Column buffer for a replicate-padded 3x3 neighbourhood:
// row (ci*9 + ky*3 + kx), column (y*W + x).
RowMatrix im2col_3x3(const Array& input) {
  const std::size_t ci = input.dim(0), h = input.dim(1), w = input.dim(2);
  RowMatrix cols(static_cast<Eigen::Index>(ci * 9), static_cast<Eigen::Index>(h * w));
  for (std::size_t c = 0; c < ci; ++c) {
    const double* src = input.data() + c * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = cols.data() + (c * 9 + ky * 3 + kx) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const double* row = src + clamp_index(static_cast<long>(y) + ky - 1, h) * w;
          double* out = dst + y * w;
          // Interior columns are a straight copy; only the first/last column clamp.
          const long shift = kx - 1;
          for (std::size_t x = 0; x < w; ++x) out[x] = row[clamp_index(static_cast<long>(x) + shift, w)];
        }
      }
    }
  }
  return cols;
}

void col2im_3x3(const RowMatrix& cols, Array& grad_input) {
  const std::size_t ci = grad_input.dim(0), h = grad_input.dim(1), w = grad_input.dim(2);
  for (std::size_t c = 0; c < ci; ++c) {
    double* dst = grad_input.data() + c * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = cols.data() + (c * 9 + ky * 3 + kx) * h * w;
        const long shift = kx - 1;
        for (std::size_t y = 0; y < h; ++y) {
          double* row = dst + clamp_index(static_cast<long>(y) + ky - 1, h) * w;
          const double* g = src + y * w;
          for (std::size_t x = 0; x < w; ++x) row[clamp_index(static_cast<long>(x) + shift, w)] += g[x];
        }
      }
    }
  }
}

void check_conv_shapes(const Array& input, const Array& weights) {
  require_rank3(input, "conv2d_3x3 input");
  if (weights.rank() != 4) {
    throw ShapeError("conv2d_3x3: weights must be [C_out,C_in,3,3], got " + shape_to_string(weights.shape()));
  }
  if (weights.dim(2) != 3 || weights.dim(3) != 3) {
    throw ShapeError("conv2d_3x3: kernel extent must be 3x3 (dimensions 2,3 of weights), got " +
                     shape_to_string(weights.shape()));
  }
  if (weights.dim(1) != input.dim(0)) {
    throw ShapeError("conv2d_3x3: C_in mismatch, weights dimension 1 is " + std::to_string(weights.dim(1)) +
                     " but input has " + std::to_string(input.dim(0)) + " channels");
  }
}

}  // namespace

Array conv2d_3x3(const Array& input, const Array& weights, const Array& bias) {
  check_conv_shapes(input, weights);
  const std::size_t co = weights.dim(0), h = input.dim(1), w = input.dim(2);
  if (bias.rank() != 1 || bias.dim(0) != co) {
    throw ShapeError("conv2d_3x3: bias must be [C_out=" + std::to_string(co) + "], got " +
                     shape_to_string(bias.shape()));
  }
  const RowMatrix cols = im2col_3x3(input);
  Array out({co, h, w});
  MatrixMap y(out.data(), static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(h * w));
  ConstMatrixMap k(weights.data(), static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(input.dim(0) * 9));
  y.noalias() = k * cols;
  for (std::size_t c = 0; c < co; ++c) y.row(static_cast<Eigen::Index>(c)).array() += bias[c];
  return out;
}

Conv2dGrads conv2d_3x3_backward(const Array& input, const Array& weights, const Array& grad_out) {
  check_conv_shapes(input, weights);
  const std::size_t co = weights.dim(0), ci = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (grad_out.shape() != Shape{co, h, w}) {
    throw ShapeError("conv2d_3x3_backward: gradient shape " + shape_to_string(grad_out.shape()) +
                     " does not match output");
  }
  const auto rows = static_cast<Eigen::Index>(ci * 9);
  const auto pixels = static_cast<Eigen::Index>(h * w);
  const RowMatrix cols = im2col_3x3(input);
  ConstMatrixMap gy(grad_out.data(), static_cast<Eigen::Index>(co), pixels);
  ConstMatrixMap k(weights.data(), static_cast<Eigen::Index>(co), rows);

  Conv2dGrads g{Array::like(input), Array::like(weights), Array({co})};
  MatrixMap gk(g.weights.data(), static_cast<Eigen::Index>(co), rows);
  gk.noalias() = gy * cols.transpose();
  for (std::size_t c = 0; c < co; ++c) g.bias[c] = gy.row(static_cast<Eigen::Index>(c)).sum();
  RowMatrix gcols = k.transpose() * gy;
  col2im_3x3(gcols, g.input);
  return g;
}

Array relu(const Array& input) {
  Array out = input;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Array relu_backward(const Array& input, const Array& grad_out) {
  require_same_shape(input, grad_out, "relu_backward");
  Array g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(input[i] > 0.0)) g[i] = 0.0;
  }
  return g;
}

Array avg_pool2(const Array& input) {
  require_rank3(input, "avg_pool2");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % 2 != 0) throw ShapeError("avg_pool2: height " + std::to_string(h) + " is odd (dimension 1); pad first");
  if (w % 2 != 0) throw ShapeError("avg_pool2: width " + std::to_string(w) + " is odd (dimension 2); pad first");
  Array out({c, h / 2, w / 2});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < h / 2; ++y) {
      for (std::size_t x = 0; x < w / 2; ++x) {
        out.at(k, y, x) = 0.25 * (input.at(k, 2 * y, 2 * x) + input.at(k, 2 * y, 2 * x + 1) +
                                  input.at(k, 2 * y + 1, 2 * x) + input.at(k, 2 * y + 1, 2 * x + 1));
      }
    }
  }
  return out;
}

Array avg_pool2_backward(const Array& grad_out) {
  require_rank3(grad_out, "avg_pool2_backward");
  const std::size_t c = grad_out.dim(0), h = grad_out.dim(1), w = grad_out.dim(2);
  Array g({c, 2 * h, 2 * w});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t x = 0; x < 2 * w; ++x) g.at(k, y, x) = 0.25 * grad_out.at(k, y / 2, x / 2);
    }
  }
  return g;
}

namespace {

// Source taps of output index i for x2 half-pixel upsampling of length n.
struct Taps {
  std::size_t near;
  std::size_t far;
};

inline Taps upsample_taps(std::size_t i, std::size_t n) {
  const std::size_t k = i / 2;
  if (i % 2 == 0) return {k, k == 0 ? 0 : k - 1};
  return {k, k + 1 < n ? k + 1 : n - 1};
}

}  // namespace

Array upsample_bilinear2(const Array& input) {
  require_rank3(input, "upsample_bilinear2");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  // Rows first, then columns; both passes use weights 3/4 and 1/4.
  Array rows({c, 2 * h, w});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      const Taps t = upsample_taps(y, h);
      for (std::size_t x = 0; x < w; ++x) rows.at(k, y, x) = 0.75 * input.at(k, t.near, x) + 0.25 * input.at(k, t.far, x);
    }
  }
  Array out({c, 2 * h, 2 * w});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t x = 0; x < 2 * w; ++x) {
        const Taps t = upsample_taps(x, w);
        out.at(k, y, x) = 0.75 * rows.at(k, y, t.near) + 0.25 * rows.at(k, y, t.far);
      }
    }
  }
  return out;
}

Array upsample_bilinear2_backward(const Array& grad_out) {
  require_rank3(grad_out, "upsample_bilinear2_backward");
  const std::size_t c = grad_out.dim(0), h2 = grad_out.dim(1), w2 = grad_out.dim(2);
  if (h2 % 2 || w2 % 2) throw ShapeError("upsample_bilinear2_backward: gradient extents must be even");
  const std::size_t h = h2 / 2, w = w2 / 2;
  Array rows({c, h2, w});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < h2; ++y) {
      for (std::size_t x = 0; x < w2; ++x) {
        const Taps t = upsample_taps(x, w);
        const double g = grad_out.at(k, y, x);
        rows.at(k, y, t.near) += 0.75 * g;
        rows.at(k, y, t.far) += 0.25 * g;
      }
    }
  }
  Array g({c, h, w});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < h2; ++y) {
      const Taps t = upsample_taps(y, h);
      for (std::size_t x = 0; x < w; ++x) {
        g.at(k, t.near, x) += 0.75 * rows.at(k, y, x);
        g.at(k, t.far, x) += 0.25 * rows.at(k, y, x);
      }
    }
  }
  return g;
}

Array pad_replicate(const Array& input, Margins m) {
  require_rank3(input, "pad_replicate");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t ph = h + m.top + m.bottom, pw = w + m.left + m.right;
  Array out({c, ph, pw});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < ph; ++y) {
      const std::size_t sy = clamp_index(static_cast<long>(y) - static_cast<long>(m.top), h);
      for (std::size_t x = 0; x < pw; ++x) {
        out.at(k, y, x) = input.at(k, sy, clamp_index(static_cast<long>(x) - static_cast<long>(m.left), w));
      }
    }
  }
  return out;
}

Array pad_replicate_backward(const Array& grad_out, Margins m) {
  require_rank3(grad_out, "pad_replicate_backward");
  const std::size_t c = grad_out.dim(0), ph = grad_out.dim(1), pw = grad_out.dim(2);
  if (ph <= m.top + m.bottom || pw <= m.left + m.right) {
    throw ShapeError("pad_replicate_backward: margins exceed gradient extents");
  }
  const std::size_t h = ph - m.top - m.bottom, w = pw - m.left - m.right;
  Array g({c, h, w});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < ph; ++y) {
      const std::size_t sy = clamp_index(static_cast<long>(y) - static_cast<long>(m.top), h);
      for (std::size_t x = 0; x < pw; ++x) {
        g.at(k, sy, clamp_index(static_cast<long>(x) - static_cast<long>(m.left), w)) += grad_out.at(k, y, x);
      }
    }
  }
  return g;
}

Array crop(const Array& input, Margins m) {
  require_rank3(input, "crop");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h <= m.top + m.bottom || w <= m.left + m.right) throw ShapeError("crop: margins exceed array extents");
  const std::size_t oh = h - m.top - m.bottom, ow = w - m.left - m.right;
  Array out({c, oh, ow});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < oh; ++y) {
      const double* src = input.data() + (k * h + y + m.top) * w + m.left;
      std::copy(src, src + ow, &out.at(k, y, 0));
    }
  }
  return out;
}

Array crop_backward(const Array& grad_out, Margins m) {
  require_rank3(grad_out, "crop_backward");
  const std::size_t c = grad_out.dim(0), h = grad_out.dim(1), w = grad_out.dim(2);
  Array g({c, h + m.top + m.bottom, w + m.left + m.right});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < h; ++y) {
      const double* src = grad_out.data() + (k * h + y) * w;
      std::copy(src, src + w, &g.at(k, y + m.top, m.left));
    }
  }
  return g;
}

}  // namespace fkinterp::ops
