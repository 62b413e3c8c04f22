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

#include "fkinterp/adaptive_conv.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "fkinterp/error.hpp"
#include "fkinterp/ops.hpp"

namespace fkinterp {
namespace {

void validate_refs(const Array& refs, std::string_view what) {
  require_rank3(refs, what);
}

void validate_field(const Array& refs, const FactorizedKernelField& fk, std::string_view what) {
  validate_refs(refs, what);
  const std::string w(what);
  if (fk.length == 0 || fk.length % 2 == 0) throw ShapeError(w + ": kernel length must be odd");
  if (fk.rank == 0) throw ShapeError(w + ": rank must be positive");
  if (fk.vertical.size() != refs.dim(0) || fk.horizontal.size() != refs.dim(0)) {
    throw ShapeError(w + ": expected kernels for " + std::to_string(refs.dim(0)) + " references");
  }
  const Shape expected{fk.rank * fk.length, refs.dim(1), refs.dim(2)};
  for (std::size_t t = 0; t < refs.dim(0); ++t) {
    if (fk.vertical[t].shape() != expected || fk.horizontal[t].shape() != expected) {
      throw ShapeError(w + ": kernel field of reference " + std::to_string(t) + " must be " +
                       shape_to_string(expected) + ", got " + shape_to_string(fk.vertical[t].shape()) + " / " +
                       shape_to_string(fk.horizontal[t].shape()));
    }
  }
}

void validate_quality(const Array& refs, const QualityField& q, std::string_view what) {
  if (q.shape() != refs.shape()) {
    throw ShapeError(std::string(what) + ": quality field " + shape_to_string(q.shape()) +
                     " does not match references " + shape_to_string(refs.shape()));
  }
}

// [taps,H,W] -> pixel-major [H*W, taps].
std::vector<double> to_pixel_major(const Array& a) {
  const std::size_t taps = a.dim(0), pixels = a.dim(1) * a.dim(2);
  std::vector<double> out(taps * pixels);
  for (std::size_t k = 0; k < taps; ++k) {
    const double* src = a.data() + k * pixels;
    for (std::size_t p = 0; p < pixels; ++p) out[p * taps + k] = src[p];
  }
  return out;
}

Array from_pixel_major(const std::vector<double>& v, std::size_t taps, std::size_t h, std::size_t w) {
  Array out({taps, h, w});
  const std::size_t pixels = h * w;
  for (std::size_t k = 0; k < taps; ++k) {
    double* dst = out.data() + k * pixels;
    for (std::size_t p = 0; p < pixels; ++p) dst[p] = v[p * taps + k];
  }
  return out;
}

}  // namespace

FactorizedKernelField FactorizedKernelField::constant(std::size_t references, std::size_t rank, std::size_t length,
                                                      std::size_t height, std::size_t width, double value) {
  FactorizedKernelField f;
  f.rank = rank;
  f.length = length;
  for (std::size_t t = 0; t < references; ++t) {
    f.vertical.emplace_back(Shape{rank * length, height, width}, value);
    f.horizontal.emplace_back(Shape{rank * length, height, width}, value);
  }
  return f;
}

FactorizedKernelField FactorizedKernelField::delta(std::size_t references, std::size_t length, std::size_t height,
                                                   std::size_t width) {
  FactorizedKernelField f = constant(references, 1, length, height, width, 0.0);
  for (std::size_t t = 0; t < references; ++t) {
    for (double& v : f.vertical[t].channel(length / 2)) v = 1.0;
    for (double& v : f.horizontal[t].channel(length / 2)) v = 1.0;
  }
  return f;
}

// ---------------------------------------------------------------------------

Array adaptive_conv(const Array& refs, const KernelField2D& field) {
  validate_refs(refs, "adaptive_conv");
  const std::size_t c = refs.dim(0), h = refs.dim(1), w = refs.dim(2), n = field.length;
  if (n == 0 || n % 2 == 0) throw ShapeError("adaptive_conv: kernel length must be odd");
  if (field.kernels.size() != c) throw ShapeError("adaptive_conv: one kernel field per reference required");
  for (const Array& k : field.kernels) {
    if (k.shape() != Shape{n * n, h, w}) throw ShapeError("adaptive_conv: kernel field size mismatch");
  }
  const std::size_t r = n / 2;
  const Array padded = ops::pad_replicate(refs, ops::Margins::uniform(r));
  Array out({1, h, w});
  for (std::size_t t = 0; t < c; ++t) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
          for (std::size_t b = 0; b < n; ++b) acc += field.kernels[t].at(a * n + b, y, x) * padded.at(t, y + a, x + b);
        }
        out.at(0, y, x) += acc;
      }
    }
  }
  return out;
}

AdaptiveConvGrads adaptive_conv_backward(const Array& refs, const KernelField2D& field, const Array& grad_out) {
  validate_refs(refs, "adaptive_conv_backward");
  const std::size_t c = refs.dim(0), h = refs.dim(1), w = refs.dim(2), n = field.length;
  if (grad_out.shape() != Shape{1, h, w}) throw ShapeError("adaptive_conv_backward: gradient shape mismatch");
  const std::size_t r = n / 2;
  const Array padded = ops::pad_replicate(refs, ops::Margins::uniform(r));
  Array grad_padded = Array::like(padded);
  AdaptiveConvGrads g;
  for (std::size_t t = 0; t < c; ++t) {
    Array gk = Array::like(field.kernels[t]);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double go = grad_out.at(0, y, x);
        for (std::size_t a = 0; a < n; ++a) {
          for (std::size_t b = 0; b < n; ++b) {
            gk.at(a * n + b, y, x) = go * padded.at(t, y + a, x + b);
            grad_padded.at(t, y + a, x + b) += go * field.kernels[t].at(a * n + b, y, x);
          }
        }
      }
    }
    g.kernels.push_back(std::move(gk));
  }
  g.refs = ops::pad_replicate_backward(grad_padded, ops::Margins::uniform(r));
  return g;
}

// ---------------------------------------------------------------------------

KernelFactors factorize_kernel(const std::vector<double>& kernel, std::size_t n, std::size_t rank) {
  if (kernel.size() != n * n) throw ShapeError("factorize_kernel: expected " + std::to_string(n * n) + " taps");
  if (rank == 0 || rank > n) {
    throw DomainError("factorize_kernel: rank " + std::to_string(rank) + " must be in [1, " + std::to_string(n) + "]");
  }
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto dim = static_cast<Eigen::Index>(n);
  const Eigen::Map<const Matrix> k(kernel.data(), dim, dim);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(k, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();

  KernelFactors out;
  out.singular_values.assign(sigma.data(), sigma.data() + sigma.size());
  for (std::size_t i = 0; i < rank; ++i) {
    const double s = std::sqrt(sigma(static_cast<Eigen::Index>(i)));
    std::vector<double> v(n), hz(n);
    for (std::size_t a = 0; a < n; ++a) {
      v[a] = s * svd.matrixU()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(i));
      hz[a] = s * svd.matrixV()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(i));
    }
    out.vertical.push_back(std::move(v));
    out.horizontal.push_back(std::move(hz));
  }
  return out;
}

std::vector<double> reconstruct_kernel(const KernelFactors& factors) {
  if (factors.vertical.empty()) return {};
  const std::size_t n = factors.vertical[0].size();
  std::vector<double> k(n * n, 0.0);
  for (std::size_t i = 0; i < factors.vertical.size(); ++i) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) k[a * n + b] += factors.vertical[i][a] * factors.horizontal[i][b];
    }
  }
  return k;
}

FactorizedKernelField factorize_field(const KernelField2D& field, std::size_t rank) {
  const std::size_t n = field.length;
  if (field.kernels.empty()) throw ShapeError("factorize_field: empty kernel field");
  const std::size_t h = field.kernels[0].dim(1), w = field.kernels[0].dim(2);
  FactorizedKernelField out = FactorizedKernelField::constant(field.references(), rank, n, h, w, 0.0);
  std::vector<double> taps(n * n);
  for (std::size_t t = 0; t < field.references(); ++t) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t k = 0; k < n * n; ++k) taps[k] = field.kernels[t].at(k, y, x);
        const KernelFactors f = factorize_kernel(taps, n, rank);
        for (std::size_t i = 0; i < rank; ++i) {
          for (std::size_t a = 0; a < n; ++a) {
            out.vertical[t].at(i * n + a, y, x) = f.vertical[i][a];
            out.horizontal[t].at(i * n + a, y, x) = f.horizontal[i][a];
          }
        }
      }
    }
  }
  return out;
}

KernelField2D expand_field(const FactorizedKernelField& fk) {
  const std::size_t n = fk.length, h = fk.height(), w = fk.width();
  KernelField2D out{n, {}};
  for (std::size_t t = 0; t < fk.references(); ++t) {
    Array k({n * n, h, w});
    for (std::size_t i = 0; i < fk.rank; ++i) {
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
              k.at(a * n + b, y, x) += fk.vertical[t].at(i * n + a, y, x) * fk.horizontal[t].at(i * n + b, y, x);
            }
          }
        }
      }
    }
    out.kernels.push_back(std::move(k));
  }
  return out;
}

// ---------------------------------------------------------------------------

Array separable_responses(const Array& refs, const FactorizedKernelField& fk) {
  validate_field(refs, fk, "factorized_conv");
  const std::size_t c = refs.dim(0), h = refs.dim(1), w = refs.dim(2), n = fk.length, taps = fk.rank * n;
  const std::size_t r = n / 2;
  const Array padded = ops::pad_replicate(refs, ops::Margins::uniform(r));
  const std::size_t pw = padded.dim(2);
  Array out({c, h, w});
  for (std::size_t t = 0; t < c; ++t) {
    const std::vector<double> kv = to_pixel_major(fk.vertical[t]);
    const std::vector<double> kh = to_pixel_major(fk.horizontal[t]);
    const double* plane = padded.data() + t * padded.dim(1) * pw;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t p = y * w + x;
        double acc = 0.0;
        for (std::size_t i = 0; i < fk.rank; ++i) {
          const double* v = &kv[p * taps + i * n];
          const double* hz = &kh[p * taps + i * n];
          for (std::size_t a = 0; a < n; ++a) {
            const double* row = plane + (y + a) * pw + x;
            double s = 0.0;
            for (std::size_t b = 0; b < n; ++b) s += hz[b] * row[b];
            acc += v[a] * s;
          }
        }
        out.at(t, y, x) = acc;
      }
    }
  }
  return out;
}

SeparableGrads separable_responses_backward(const Array& refs, const FactorizedKernelField& fk,
                                            const Array& grad_responses) {
  validate_field(refs, fk, "factorized_conv_backward");
  require_same_shape(grad_responses, refs, "factorized_conv_backward gradient");
  const std::size_t c = refs.dim(0), h = refs.dim(1), w = refs.dim(2), n = fk.length, taps = fk.rank * n;
  const std::size_t r = n / 2;
  const Array padded = ops::pad_replicate(refs, ops::Margins::uniform(r));
  const std::size_t pw = padded.dim(2);
  Array grad_padded = Array::like(padded);
  SeparableGrads g;
  std::vector<double> colsum(n);
  for (std::size_t t = 0; t < c; ++t) {
    const std::vector<double> kv = to_pixel_major(fk.vertical[t]);
    const std::vector<double> kh = to_pixel_major(fk.horizontal[t]);
    std::vector<double> gkv(kv.size(), 0.0), gkh(kh.size(), 0.0);
    const double* plane = padded.data() + t * padded.dim(1) * pw;
    double* gplane = grad_padded.data() + t * padded.dim(1) * pw;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t p = y * w + x;
        const double go = grad_responses.at(t, y, x);
        for (std::size_t i = 0; i < fk.rank; ++i) {
          const std::size_t base = p * taps + i * n;
          const double* v = &kv[base];
          const double* hz = &kh[base];
          std::fill(colsum.begin(), colsum.end(), 0.0);
          for (std::size_t a = 0; a < n; ++a) {
            const double* row = plane + (y + a) * pw + x;
            double* grow = gplane + (y + a) * pw + x;
            const double coef = go * v[a];
            double s = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
              s += hz[b] * row[b];
              colsum[b] += v[a] * row[b];
              grow[b] += coef * hz[b];
            }
            gkv[base + a] = go * s;
          }
          for (std::size_t b = 0; b < n; ++b) gkh[base + b] = go * colsum[b];
        }
      }
    }
    g.vertical.push_back(from_pixel_major(gkv, taps, h, w));
    g.horizontal.push_back(from_pixel_major(gkh, taps, h, w));
  }
  g.refs = ops::pad_replicate_backward(grad_padded, ops::Margins::uniform(r));
  return g;
}

Array factorized_conv(const Array& refs, const FactorizedKernelField& fk) {
  const Array resp = separable_responses(refs, fk);
  Array out({1, refs.dim(1), refs.dim(2)});
  for (std::size_t t = 0; t < resp.dim(0); ++t) {
    const auto ch = resp.channel(t);
    auto dst = out.channel(0);
    for (std::size_t p = 0; p < ch.size(); ++p) dst[p] += ch[p];
  }
  return out;
}

SeparableGrads factorized_conv_backward(const Array& refs, const FactorizedKernelField& fk, const Array& grad_out) {
  if (grad_out.shape() != Shape{1, refs.dim(1), refs.dim(2)}) {
    throw ShapeError("factorized_conv_backward: gradient must be [1,H,W]");
  }
  Array spread = Array::like(refs);
  for (std::size_t t = 0; t < refs.dim(0); ++t) {
    auto dst = spread.channel(t);
    const auto src = grad_out.channel(0);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return separable_responses_backward(refs, fk, spread);
}

// ---------------------------------------------------------------------------

Array qa_fk_synthesize_scale(const Array& refs, const FactorizedKernelField& fk, const QualityField& q,
                             const Array& carry) {
  validate_field(refs, fk, "qa_fk_synthesize_scale");
  validate_quality(refs, q, "qa_fk_synthesize_scale");
  const Shape frame{1, refs.dim(1), refs.dim(2)};
  if (carry.shape() != frame) {
    throw ShapeError("qa_fk_synthesize_scale: carry " + shape_to_string(carry.shape()) + " does not match scale " +
                     shape_to_string(frame));
  }
  const Array resp = separable_responses(refs, fk);
  Array out = carry;
  auto dst = out.channel(0);
  for (std::size_t t = 0; t < refs.dim(0); ++t) {
    const auto rt = resp.channel(t);
    const auto qt = q.channel(t);
    for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += qt[p] * rt[p];
  }
  return out;
}

QaSynthesisGrads qa_fk_synthesize_scale_backward(const Array& refs, const FactorizedKernelField& fk,
                                                 const QualityField& q, const Array& grad_out) {
  validate_field(refs, fk, "qa_fk_synthesize_scale_backward");
  validate_quality(refs, q, "qa_fk_synthesize_scale_backward");
  if (grad_out.shape() != Shape{1, refs.dim(1), refs.dim(2)}) {
    throw ShapeError("qa_fk_synthesize_scale_backward: gradient must be [1,H,W]");
  }
  const Array resp = separable_responses(refs, fk);
  Array grad_resp = Array::like(refs);
  QaSynthesisGrads g;
  g.quality = Array::like(q);
  const auto go = grad_out.channel(0);
  for (std::size_t t = 0; t < refs.dim(0); ++t) {
    const auto rt = resp.channel(t);
    const auto qt = q.channel(t);
    auto gq = g.quality.channel(t);
    auto gr = grad_resp.channel(t);
    for (std::size_t p = 0; p < go.size(); ++p) {
      gq[p] = go[p] * rt[p];
      gr[p] = go[p] * qt[p];
    }
  }
  SeparableGrads sg = separable_responses_backward(refs, fk, grad_resp);
  g.refs = std::move(sg.refs);
  g.vertical = std::move(sg.vertical);
  g.horizontal = std::move(sg.horizontal);
  g.carry = grad_out;
  return g;
}

std::array<Array, 3> reference_pyramid(const Array& refs) {
  require_rank3(refs, "reference_pyramid");
  if (refs.dim(1) % 4 != 0 || refs.dim(2) % 4 != 0) {
    throw ShapeError("multiscale synthesis needs frame dimensions divisible by 4, got " +
                     shape_to_string(refs.shape()) + "; pad first");
  }
  Array half = ops::downscale_half(refs);
  Array quarter = ops::downscale_half(half);
  return {std::move(quarter), std::move(half), refs};
}

ScalePyramid multiscale_synthesize(const Array& refs, const std::array<ScaleFields, 3>& fields) {
  const std::array<Array, 3> pyr = reference_pyramid(refs);
  ScalePyramid out;
  Array carry({1, pyr[0].dim(1), pyr[0].dim(2)});
  for (std::size_t s = 0; s < 3; ++s) {
    out.at(s) = qa_fk_synthesize_scale(pyr[s], fields[s].kernels, fields[s].quality, carry);
    if (s < 2) carry = ops::upsample_bilinear2(out.at(s));
  }
  return out;
}

Array reference_contributions(const Array& refs, const std::array<ScaleFields, 3>& fields) {
  const std::array<Array, 3> pyr = reference_pyramid(refs);
  Array acc;
  for (std::size_t s = 0; s < 3; ++s) {
    validate_quality(pyr[s], fields[s].quality, "reference_contributions");
    Array term = separable_responses(pyr[s], fields[s].kernels);
    for (std::size_t i = 0; i < term.size(); ++i) term[i] *= fields[s].quality[i];
    if (s == 0) {
      acc = std::move(term);
    } else {
      acc = ops::upsample_bilinear2(acc);
      acc += term;
    }
  }
  return acc;
}

Array weighting_maps(const Array& contributions) {
  require_rank3(contributions, "weighting_maps");
  const std::size_t c = contributions.dim(0), pixels = contributions.dim(1) * contributions.dim(2);
  Array out = Array::like(contributions);
  for (std::size_t p = 0; p < pixels; ++p) {
    double total = 0.0;
    for (std::size_t t = 0; t < c; ++t) total += contributions[t * pixels + p];
    for (std::size_t t = 0; t < c; ++t) {
      out[t * pixels + p] = std::abs(total) < 1e-9 ? 1.0 / static_cast<double>(c) : contributions[t * pixels + p] / total;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Input layout of a recorded synthesis node: refs, vertical[0..c), horizontal[0..c), then extras.
FactorizedKernelField gather_field(Tape::Inputs in, std::size_t c, std::size_t rank, std::size_t length) {
  FactorizedKernelField fk;
  fk.rank = rank;
  fk.length = length;
  for (std::size_t t = 0; t < c; ++t) {
    fk.vertical.push_back(*in[1 + t]);
    fk.horizontal.push_back(*in[1 + c + t]);
  }
  return fk;
}

std::vector<VarId> field_inputs(VarId refs, const TapeKernelField& k) {
  std::vector<VarId> ids{refs};
  ids.insert(ids.end(), k.vertical.begin(), k.vertical.end());
  ids.insert(ids.end(), k.horizontal.begin(), k.horizontal.end());
  return ids;
}

}  // namespace

VarId record_qa_fk_synthesize(Tape& tape, VarId refs, const TapeKernelField& k, VarId quality, VarId carry) {
  const std::size_t c = k.vertical.size(), rank = k.rank, n = k.length;
  std::vector<VarId> ids = field_inputs(refs, k);
  ids.push_back(quality);
  ids.push_back(carry);
  return tape.record(
      "qa_fk_synthesize_scale", std::move(ids),
      [c, rank, n](Tape::Inputs in) {
        return qa_fk_synthesize_scale(*in[0], gather_field(in, c, rank, n), *in[1 + 2 * c], *in[2 + 2 * c]);
      },
      [c, rank, n](Tape::Inputs in, const Array&, const Array& g) {
        QaSynthesisGrads r = qa_fk_synthesize_scale_backward(*in[0], gather_field(in, c, rank, n), *in[1 + 2 * c], g);
        std::vector<Array> out{std::move(r.refs)};
        for (auto& a : r.vertical) out.push_back(std::move(a));
        for (auto& a : r.horizontal) out.push_back(std::move(a));
        out.push_back(std::move(r.quality));
        out.push_back(std::move(r.carry));
        return out;
      });
}

VarId record_factorized_conv(Tape& tape, VarId refs, const TapeKernelField& k) {
  const std::size_t c = k.vertical.size(), rank = k.rank, n = k.length;
  return tape.record(
      "factorized_conv", field_inputs(refs, k),
      [c, rank, n](Tape::Inputs in) { return factorized_conv(*in[0], gather_field(in, c, rank, n)); },
      [c, rank, n](Tape::Inputs in, const Array&, const Array& g) {
        SeparableGrads r = factorized_conv_backward(*in[0], gather_field(in, c, rank, n), g);
        std::vector<Array> out{std::move(r.refs)};
        for (auto& a : r.vertical) out.push_back(std::move(a));
        for (auto& a : r.horizontal) out.push_back(std::move(a));
        return out;
      });
}

TapePyramid record_multiscale_synthesize(Tape& tape, VarId refs, const std::array<TapeScaleFields, 3>& fields) {
  const Array& full = tape.value(refs);
  require_rank3(full, "multiscale_synthesize");
  if (full.dim(1) % 4 != 0 || full.dim(2) % 4 != 0) {
    throw ShapeError("multiscale synthesis needs frame dimensions divisible by 4, got " +
                     shape_to_string(full.shape()) + "; pad first");
  }
  const VarId half = tape.avg_pool2(refs);
  const VarId quarter = tape.avg_pool2(half);
  const std::array<VarId, 3> pyr{quarter, half, refs};
  TapePyramid out;
  VarId carry = tape.leaf(Array({1, full.dim(1) / 4, full.dim(2) / 4}));
  for (std::size_t s = 0; s < 3; ++s) {
    out.levels[s] = record_qa_fk_synthesize(tape, pyr[s], fields[s].kernels, fields[s].quality, carry);
    if (s < 2) carry = tape.upsample_bilinear2(out.levels[s]);
  }
  return out;
}

}  // namespace fkinterp
