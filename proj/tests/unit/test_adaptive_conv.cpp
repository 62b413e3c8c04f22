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

#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "fkinterp/adaptive_conv.hpp"
#include "fkinterp/error.hpp"
#include "fkinterp/grad_check.hpp"
#include "fkinterp/ops.hpp"
#include "test_support.hpp"

using namespace fkinterp;
using fkinterp::testing::Gen;
using fkinterp::testing::max_abs_diff;

namespace {

long clampi(long v, long lo, long hi) { return std::min(std::max(v, lo), hi); }

double ref_at(const Array& refs, std::size_t t, long y, long x) {
  return refs.at(t, clampi(y, 0, static_cast<long>(refs.dim(1)) - 1), clampi(x, 0, static_cast<long>(refs.dim(2)) - 1));
}

// Per-pixel n x n dot product with clamped patch reads.
Array adaptive_oracle(const Array& refs, const KernelField2D& k) {
  const long n = static_cast<long>(k.length), r = n / 2;
  Array out({1, refs.dim(1), refs.dim(2)});
  for (long y = 0; y < static_cast<long>(refs.dim(1)); ++y)
    for (long x = 0; x < static_cast<long>(refs.dim(2)); ++x) {
      double s = 0;
      for (std::size_t t = 0; t < refs.dim(0); ++t)
        for (long a = 0; a < n; ++a)
          for (long b = 0; b < n; ++b) s += k.kernels[t].at(a * n + b, y, x) * ref_at(refs, t, y + a - r, x + b - r);
      out.at(0, y, x) = s;
    }
  return out;
}

// Triple loop for one gated scale with explicit outer-product kernels.
Array qa_oracle(const Array& refs, const FactorizedKernelField& fk, const Array& q, const Array& carry) {
  const long n = static_cast<long>(fk.length), r = n / 2;
  Array out = carry;
  for (long y = 0; y < static_cast<long>(refs.dim(1)); ++y)
    for (long x = 0; x < static_cast<long>(refs.dim(2)); ++x)
      for (std::size_t t = 0; t < refs.dim(0); ++t) {
        double s = 0;
        for (std::size_t i = 0; i < fk.rank; ++i)
          for (long a = 0; a < n; ++a)
            for (long b = 0; b < n; ++b)
              s += fk.vertical[t].at(i * n + a, y, x) * fk.horizontal[t].at(i * n + b, y, x) *
                   ref_at(refs, t, y + a - r, x + b - r);
        out.at(0, y, x) += q.at(t, y, x) * s;
      }
  return out;
}

KernelField2D random_field(Gen& g, std::size_t c, std::size_t n, std::size_t h, std::size_t w) {
  KernelField2D k;
  k.length = n;
  for (std::size_t t = 0; t < c; ++t) k.kernels.push_back(g.array({n * n, h, w}));
  return k;
}

FactorizedKernelField random_factorized(Gen& g, std::size_t c, std::size_t rank, std::size_t n, std::size_t h,
                                        std::size_t w) {
  FactorizedKernelField f;
  f.rank = rank;
  f.length = n;
  for (std::size_t t = 0; t < c; ++t) {
    f.vertical.push_back(g.array({rank * n, h, w}));
    f.horizontal.push_back(g.array({rank * n, h, w}));
  }
  return f;
}

}  // namespace

TEST_SUITE("adaptive_conv") {
  TEST_CASE("raw adaptive convolution examples") {
    Gen g(21);
    Array refs = g.samples(2, 6, 7);
    KernelField2D half;
    half.length = 3;
    for (int t = 0; t < 2; ++t) {
      Array k({9, 6, 7});
      for (std::size_t i = 0; i < 42; ++i) k.at(4, i / 7, i % 7) = 0.5;
      half.kernels.push_back(k);
    }
    Array avg = adaptive_conv(refs, half);
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 7; ++x) CHECK(avg.at(0, y, x) == (refs.at(0, y, x) + refs.at(1, y, x)) / 2);

    KernelField2D left = half;
    left.kernels[0] *= 2.0;
    left.kernels[1].fill(0.0);
    Array l = adaptive_conv(refs, left);
    CHECK(l == slice_channels(refs, 0, 1));
  }

  TEST_CASE("raw adaptive convolution matches the per-pixel oracle") {
    Gen g(22);
    Array refs = g.array({2, 8, 8});
    KernelField2D k = random_field(g, 2, 5, 8, 8);
    CHECK(max_abs_diff(adaptive_conv(refs, k), adaptive_oracle(refs, k)) < 1e-12);
    CHECK_THROWS_AS(adaptive_conv(g.array({2, 8, 9}), k), ShapeError);
  }

  TEST_CASE("raw adaptive convolution gradients") {
    Gen g(23);
    Array refs = g.array({2, 4, 5});
    KernelField2D k = random_field(g, 2, 3, 4, 5);
    auto op = [](const std::vector<Array>& v) {
      KernelField2D f{3, {v[1], v[2]}};
      return adaptive_conv(v[0], f);
    };
    auto vjp = [](const std::vector<Array>& v, const Array& go) {
      KernelField2D f{3, {v[1], v[2]}};
      auto gr = adaptive_conv_backward(v[0], f, go);
      return std::vector<Array>{gr.refs, gr.kernels[0], gr.kernels[1]};
    };
    CHECK(grad_check_op(op, vjp, {refs, k.kernels[0], k.kernels[1]}).worst() < 1e-6);
  }

  TEST_CASE("factorize_kernel examples") {
    Gen g(24);
    std::vector<double> u(6), v(6), outer(36);
    for (auto& e : u) e = g.normal();
    for (auto& e : v) e = g.normal();
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) outer[a * 6 + b] = u[a] * v[b];
    auto rec = reconstruct_kernel(factorize_kernel(outer, 6, 1));
    for (int i = 0; i < 36; ++i) CHECK(std::abs(rec[i] - outer[i]) < 1e-12);

    std::vector<double> eye(25, 0.0);
    for (int i = 0; i < 5; ++i) eye[i * 6] = 1.0;
    auto rec2 = reconstruct_kernel(factorize_kernel(eye, 5, 5));
    for (int i = 0; i < 25; ++i) CHECK(std::abs(rec2[i] - eye[i]) < 1e-12);

    CHECK_THROWS_AS(factorize_kernel(eye, 5, 6), DomainError);
    CHECK_THROWS_AS(factorize_kernel(eye, 5, 0), DomainError);
  }

  TEST_CASE("rank-3 truncation error equals the tail singular energy") {
    Gen g(25);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> w(49);
      for (auto& e : w) e = g.normal();
      auto f = factorize_kernel(w, 7, 3);
      auto rec = reconstruct_kernel(f);
      double err = 0;
      for (int i = 0; i < 49; ++i) err += (rec[i] - w[i]) * (rec[i] - w[i]);

      // Independent decomposition: eigenvalues of W'W are the squared singular values.
      Eigen::Matrix<double, 7, 7, Eigen::RowMajor> m;
      for (int i = 0; i < 49; ++i) m(i / 7, i % 7) = w[i];
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 7, 7>> es(m.transpose() * m);
      const auto ev = es.eigenvalues();  // ascending
      const double tail = ev(0) + ev(1) + ev(2) + ev(3);
      CHECK(std::abs(err - tail) < 1e-9 * std::max(1.0, tail));
    }
  }

  TEST_CASE("property: full-rank factorization reproduces the raw convolution") {
    Gen g(26);
    for (int trial = 0; trial < 8; ++trial) {
      const std::size_t n = 2 * g.size(1, 3) + 1, h = g.size(2, 7), w = g.size(2, 7);
      Array refs = g.array({2, h, w});
      KernelField2D k = random_field(g, 2, n, h, w);
      FactorizedKernelField fk = factorize_field(k, n);
      CHECK(max_abs_diff(factorized_conv(refs, fk), adaptive_conv(refs, k)) < 1e-10);
    }
  }

  TEST_CASE("property: rank-1 factorized equals raw convolution of the outer product") {
    Gen g(27);
    for (int trial = 0; trial < 8; ++trial) {
      const std::size_t n = 2 * g.size(0, 3) + 1, h = g.size(1, 6), w = g.size(1, 6);
      Array refs = g.array({2, h, w});
      FactorizedKernelField fk = random_factorized(g, 2, 1, n, h, w);
      CHECK(max_abs_diff(factorized_conv(refs, fk), adaptive_conv(refs, expand_field(fk))) < 1e-12);
    }
  }

  TEST_CASE("uniform rank-1 kernels give a box filter of both references") {
    Gen g(28);
    const std::size_t n = 5, h = 9, w = 8;
    Array refs = g.samples(2, h, w);
    auto fk = FactorizedKernelField::constant(2, 1, n, h, w, 1.0 / n);
    Array out = factorized_conv(refs, fk);
    for (long y = 0; y < static_cast<long>(h); ++y)
      for (long x = 0; x < static_cast<long>(w); ++x) {
        double box = 0;
        for (int t = 0; t < 2; ++t)
          for (long a = -2; a <= 2; ++a)
            for (long b = -2; b <= 2; ++b) box += ref_at(refs, t, y + a, x + b);
        CHECK(std::abs(out.at(0, y, x) - box / 25.0) < 1e-9);
      }
    CHECK(factorized_conv(refs, FactorizedKernelField::constant(2, 1, n, h, w, 0.0)).abs_max() == 0.0);
  }

  TEST_CASE("factorized convolution gradients") {
    Gen g(29);
    const std::size_t n = 3, h = 4, w = 5;
    FactorizedKernelField fk = random_factorized(g, 2, 2, n, h, w);
    auto make = [&](const std::vector<Array>& v) {
      FactorizedKernelField f;
      f.rank = 2;
      f.length = n;
      f.vertical = {v[1], v[2]};
      f.horizontal = {v[3], v[4]};
      return f;
    };
    auto op = [&](const std::vector<Array>& v) { return factorized_conv(v[0], make(v)); };
    auto vjp = [&](const std::vector<Array>& v, const Array& go) {
      auto gr = factorized_conv_backward(v[0], make(v), go);
      return std::vector<Array>{gr.refs, gr.vertical[0], gr.vertical[1], gr.horizontal[0], gr.horizontal[1]};
    };
    auto rep = grad_check_op(op, vjp, {g.array({2, h, w}), fk.vertical[0], fk.vertical[1], fk.horizontal[0],
                                       fk.horizontal[1]});
    CHECK(rep.worst() < 1e-6);
  }

  TEST_CASE("gated synthesis at one scale") {
    Gen g(30);
    const std::size_t n = 5, h = 6, w = 7;
    Array refs = g.samples(2, h, w);
    Array zero({1, h, w});
    auto delta = FactorizedKernelField::delta(2, n, h, w);

    Array q({2, h, w});
    for (std::size_t i = 0; i < h * w; ++i) q.channel(0)[i] = 1.0;
    CHECK(qa_fk_synthesize_scale(refs, delta, q, zero) == slice_channels(refs, 0, 1));

    Array carry = g.array({1, h, w});
    CHECK(qa_fk_synthesize_scale(refs, random_factorized(g, 2, 2, n, h, w), Array({2, h, w}), carry) == carry);

    auto fk = random_factorized(g, 2, 2, n, h, w);
    Array qr = g.array({2, h, w});
    CHECK(max_abs_diff(qa_fk_synthesize_scale(refs, fk, qr, carry), qa_oracle(refs, fk, qr, carry)) < 1e-12);

    CHECK_THROWS_AS(qa_fk_synthesize_scale(refs, fk, Array({2, h, w + 1}), carry), ShapeError);
    CHECK_THROWS_AS(qa_fk_synthesize_scale(refs, random_factorized(g, 2, 1, n, h + 1, w), qr, carry), ShapeError);
  }

  TEST_CASE("property: quality gating is linear per reference") {
    Gen g(31);
    for (int trial = 0; trial < 6; ++trial) {
      const std::size_t n = 3, h = g.size(2, 6), w = g.size(2, 6);
      Array refs = g.array({2, h, w});
      auto fk = random_factorized(g, 2, 1, n, h, w);
      Array q = g.array({2, h, w}), zero({1, h, w});
      const double k = g.uniform(-3, 3);
      const std::size_t t = g.size(0, 1);
      Array only({2, h, w});
      for (std::size_t i = 0; i < h * w; ++i) only.channel(t)[i] = q.channel(t)[i];
      Array scaled = only;
      scaled *= k;
      Array base = qa_fk_synthesize_scale(refs, fk, only, zero);
      Array out = qa_fk_synthesize_scale(refs, fk, scaled, zero);
      CHECK(max_abs_diff(out, base * k) < 1e-12);
    }
  }

  TEST_CASE("gated synthesis gradients") {
    Gen g(32);
    const std::size_t n = 3, h = 4, w = 4;
    auto fk = random_factorized(g, 2, 2, n, h, w);
    auto make = [&](const std::vector<Array>& v) {
      FactorizedKernelField f;
      f.rank = 2;
      f.length = n;
      f.vertical = {v[1], v[2]};
      f.horizontal = {v[3], v[4]};
      return f;
    };
    auto op = [&](const std::vector<Array>& v) { return qa_fk_synthesize_scale(v[0], make(v), v[5], v[6]); };
    auto vjp = [&](const std::vector<Array>& v, const Array& go) {
      auto gr = qa_fk_synthesize_scale_backward(v[0], make(v), v[5], go);
      return std::vector<Array>{gr.refs, gr.vertical[0], gr.vertical[1], gr.horizontal[0], gr.horizontal[1],
                                gr.quality, gr.carry};
    };
    auto rep = grad_check_op(op, vjp, {g.array({2, h, w}), fk.vertical[0], fk.vertical[1], fk.horizontal[0],
                                       fk.horizontal[1], g.array({2, h, w}), g.array({1, h, w})});
    CHECK(rep.worst() < 1e-6);
  }

  TEST_CASE("multiscale synthesis: scale carry") {
    Gen g(33);
    const std::size_t h = 12, w = 16;
    Array refs = g.samples(2, h, w);
    std::array<ScaleFields, 3> fields;
    const std::array<std::size_t, 3> lens{3, 5, 7};
    for (std::size_t s = 0; s < 3; ++s) {
      const std::size_t hs = h >> (2 - s), ws = w >> (2 - s);
      fields[s].kernels = random_factorized(g, 2, 1, lens[s], hs, ws);
      fields[s].quality = g.array({2, hs, ws});
    }
    ScalePyramid full = multiscale_synthesize(refs, fields);

    auto zeroed = fields;
    for (std::size_t s = 1; s < 3; ++s) {
      for (auto& a : zeroed[s].kernels.vertical) a.fill(0.0);
      zeroed[s].quality.fill(0.0);
    }
    ScalePyramid carried = multiscale_synthesize(refs, zeroed);
    CHECK(carried.quarter == full.quarter);
    CHECK(carried.full == ops::upsample_bilinear2(ops::upsample_bilinear2(full.quarter)));

    // Contributions of the two references sum to the synthesized frame.
    Array contrib = reference_contributions(refs, fields);
    Array sum = slice_channels(contrib, 0, 1) + slice_channels(contrib, 1, 1);
    CHECK(max_abs_diff(sum, full.full) < 1e-9);

    CHECK_THROWS_AS(multiscale_synthesize(g.array({2, 10, 16}), fields), ShapeError);
  }

  TEST_CASE("multiscale synthesis: identical references through the coarse scale only") {
    Gen g(34);
    const std::size_t h = 16, w = 12;
    Array f = g.smooth(h, w);
    Array refs = concat_channels(std::vector<Array>{f, f});
    std::array<ScaleFields, 3> fields;
    const std::array<std::size_t, 3> lens{3, 5, 5};
    for (std::size_t s = 0; s < 3; ++s) {
      const std::size_t hs = h >> (2 - s), ws = w >> (2 - s);
      fields[s].kernels = FactorizedKernelField::delta(2, lens[s], hs, ws);
      fields[s].quality = Array({2, hs, ws}, s == 0 ? 0.5 : 0.0);
    }
    Array expect = ops::upsample_bilinear2(ops::upsample_bilinear2(ops::avg_pool2(ops::avg_pool2(f))));
    CHECK(max_abs_diff(multiscale_synthesize(refs, fields).full, expect) < 1e-12);
  }

  TEST_CASE("multiscale synthesis gradients via the tape") {
    Gen g(35);
    const std::size_t h = 8, w = 8;
    const std::array<std::size_t, 3> lens{3, 3, 5};
    std::vector<Array> inputs{g.array({2, h, w})};
    for (std::size_t s = 0; s < 3; ++s) {
      const std::size_t hs = h >> (2 - s), ws = w >> (2 - s);
      inputs.push_back(g.array({lens[s], hs, ws}));  // vertical left
      inputs.push_back(g.array({lens[s], hs, ws}));  // vertical right
      inputs.push_back(g.array({lens[s], hs, ws}));  // horizontal left
      inputs.push_back(g.array({lens[s], hs, ws}));  // horizontal right
      inputs.push_back(g.array({2, hs, ws}));        // quality
    }
    Array cot = g.array({1, h, w});
    auto run = [&](const std::vector<Array>& v, std::vector<Array>* grads) {
      Tape t;
      VarId refs = t.leaf(v[0]);
      std::array<TapeScaleFields, 3> f;
      std::vector<VarId> ids;
      for (std::size_t s = 0; s < 3; ++s) {
        const std::size_t o = 1 + 5 * s;
        for (std::size_t k = 0; k < 5; ++k) ids.push_back(t.leaf(v[o + k]));
        f[s].kernels.rank = 1;
        f[s].kernels.length = lens[s];
        f[s].kernels.vertical = {ids[5 * s], ids[5 * s + 1]};
        f[s].kernels.horizontal = {ids[5 * s + 2], ids[5 * s + 3]};
        f[s].quality = ids[5 * s + 4];
      }
      TapePyramid p = record_multiscale_synthesize(t, refs, f);
      const Array& out = t.value(p.levels[2]);
      double s = 0;
      for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * cot[i];
      if (grads) {
        t.backward(p.levels[2], cot);
        grads->clear();
        grads->push_back(t.grad(refs));
        for (VarId id : ids) grads->push_back(t.grad(id));
      }
      return s;
    };
    auto rep = grad_check([&](const std::vector<Array>& v) { return run(v, nullptr); },
                          [&](const std::vector<Array>& v) {
                            std::vector<Array> gr;
                            run(v, &gr);
                            return gr;
                          },
                          inputs, GradCheckOptions{.step = 1e-5, .tolerance = 1e-5, .max_entries = 24, .seed = 1, .skip = {}});
    CHECK(rep.passed);
    for (std::size_t i = 0; i < rep.max_rel_error.size(); ++i) CHECK(rep.max_rel_error[i] < 1e-5);
  }
}
