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

#include <cmath>

#include "fkinterp/error.hpp"
#include "fkinterp/grad_check.hpp"
#include "fkinterp/losses.hpp"
#include "fkinterp/ops.hpp"
#include "test_support.hpp"

using namespace fkinterp;
using fkinterp::testing::Gen;

namespace {

// Plain matrix products, no butterflies.
double satd_block_oracle(const double* b) {
  double t[64] = {}, u[64] = {};
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      for (int k = 0; k < 8; ++k) t[i * 8 + j] += kHadamard8[i][k] * b[k * 8 + j];
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      for (int k = 0; k < 8; ++k) u[i * 8 + j] += t[i * 8 + k] * kHadamard8[k][j];
  double s = 0;
  for (double v : u) s += std::abs(v);
  return s;
}

// Whole-frame SATD of target - pred with zero padding, by the oracle above.
double satd_oracle(const Array& pred, const Array& target) {
  double s = 0;
  const std::size_t h = pred.dim(1), w = pred.dim(2);
  for (std::size_t c = 0; c < pred.dim(0); ++c)
    for (std::size_t by = 0; by < h; by += 8)
      for (std::size_t bx = 0; bx < w; bx += 8) {
        double blk[64] = {};
        for (std::size_t y = 0; y < 8 && by + y < h; ++y)
          for (std::size_t x = 0; x < 8 && bx + x < w; ++x)
            blk[y * 8 + x] = target.at(c, by + y, bx + x) - pred.at(c, by + y, bx + x);
        s += satd_block_oracle(blk);
      }
  return s;
}

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("Hadamard matrix is orthogonal up to 8") {
    for (int i = 0; i < 8; ++i) {
      CHECK(kHadamard8[0][i] == 1);
      CHECK(kHadamard8[i][0] == 1);
      for (int j = 0; j < 8; ++j) {
        int dot = 0;
        for (int k = 0; k < 8; ++k) dot += kHadamard8[i][k] * kHadamard8[j][k];
        CHECK(dot == (i == j ? 8 : 0));
        CHECK(std::abs(kHadamard8[i][j]) == 1);
      }
    }
  }

  TEST_CASE("fast transform equals the matrix product") {
    Gen g(41);
    for (int trial = 0; trial < 20; ++trial) {
      double b[64], out[64];
      for (double& v : b) v = g.uniform(-50, 50);
      hadamard8x8(b, out);
      double direct[64] = {}, t[64] = {};
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          for (int k = 0; k < 8; ++k) t[i * 8 + j] += kHadamard8[i][k] * b[k * 8 + j];
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          for (int k = 0; k < 8; ++k) direct[i * 8 + j] += t[i * 8 + k] * kHadamard8[k][j];
      for (int i = 0; i < 64; ++i) CHECK(std::abs(out[i] - direct[i]) < 1e-9);
      // DC coefficient is the block sum.
      double sum = 0;
      for (double v : b) sum += v;
      CHECK(std::abs(out[0] - sum) < 1e-9);
      CHECK(std::abs(satd8x8(b) - satd_block_oracle(b)) < 1e-9);
    }
  }

  TEST_CASE("SATD calibration") {
    Array zero({1, 8, 8});
    CHECK(satd_loss(zero, zero) == 0.0);

    Gen g(42);
    for (int trial = 0; trial < 10; ++trial) {
      const double v = g.uniform(-5, 5);
      CHECK(satd_loss(zero, Array({1, 8, 8}, v)) == doctest::Approx(64 * std::abs(v)).epsilon(1e-14));
    }
    Array quarter({1, 8, 8}, 0.25);
    CHECK(satd_loss(zero, quarter) == 16.0);
    CHECK(l1_loss(zero, quarter) == 16.0);

    for (std::size_t pos = 0; pos < 64; pos += 9) {
      Array spike({1, 8, 8});
      spike[pos] = 1.0;
      CHECK(satd_loss(zero, spike) == 64.0);
      CHECK(l1_loss(zero, spike) == 1.0);
    }
  }

  TEST_CASE("equal l1, different SATD") {
    // An irregular sign pattern; a checkerboard would be a single Walsh
    // basis function and tie with the flat block.
    Array zero({1, 8, 8}), flat({1, 8, 8}, 0.25), alt({1, 8, 8});
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) alt.at(0, y, x) = ((x * x + 3 * y) % 5 < 2 ? 0.25 : -0.25);
    CHECK(l1_loss(zero, flat) == l1_loss(zero, alt));
    CHECK(satd_loss(zero, flat) != satd_loss(zero, alt));
  }

  TEST_CASE("property: SATD symmetry and absolute homogeneity") {
    Gen g(43);
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t h = g.size(1, 20), w = g.size(1, 20);
      Array zero({1, h, w}), r = g.array({1, h, w}, -10, 10);
      const double k = g.uniform(-4, 4);
      const double base = satd_loss(zero, r);
      CHECK(satd_loss(zero, r * -1.0) == doctest::Approx(base).epsilon(1e-12));
      CHECK(satd_loss(zero, r * k) == doctest::Approx(std::abs(k) * base).epsilon(1e-12));
      CHECK(std::abs(base - satd_oracle(zero, r)) < 1e-9 * std::max(1.0, base));
    }
  }

  TEST_CASE("l1 loss") {
    Gen g(44);
    Array a = g.array({2, 5, 5});
    CHECK(l1_loss(a, a) == 0.0);
    CHECK_THROWS_AS(l1_loss(a, Array({2, 5, 4})), ShapeError);
    Array b = a;
    b[0] += 1.0;
    Array grad = l1_loss_backward(a, b);
    CHECK(grad[0] == -1.0);
    CHECK(grad[1] == 0.0);

    Array target = g.array({1, 4, 4});
    Array pred = target + g.array_away_from_zero({1, 4, 4}, 1e-3);
    auto rep = grad_check([&](const std::vector<Array>& v) { return l1_loss(v[0], target); },
                          [&](const std::vector<Array>& v) { return std::vector<Array>{l1_loss_backward(v[0], target)}; },
                          {pred});
    CHECK(rep.worst() < 1e-6);
  }

  TEST_CASE("SATD gradient") {
    Gen g(45);
    Array target = g.array({1, 8, 16}, -5, 5);
    Array pred = g.array({1, 8, 16}, -5, 5);
    auto rep = grad_check([&](const std::vector<Array>& v) { return satd_loss(v[0], target); },
                          [&](const std::vector<Array>& v) {
                            return std::vector<Array>{satd_loss_backward(v[0], target)};
                          },
                          {pred});
    CHECK(rep.worst() < 1e-6);
  }

  TEST_CASE("multiscale loss") {
    Gen g(46);
    Array target = g.samples(1, 16, 24);
    auto tp = target_pyramid(target);
    CHECK(tp[1] == ops::avg_pool2(target));
    CHECK(tp[0] == ops::avg_pool2(tp[1]));

    ScalePyramid perfect{tp[0], tp[1], tp[2]};
    CHECK(multiscale_loss(perfect, target, LossConfig{}) == 0.0);

    ScalePyramid only_full = perfect;
    only_full.full = target + g.array({1, 16, 24});
    for (LossKind kind : {LossKind::kL1, LossKind::kSatd}) {
      LossConfig cfg;
      cfg.kind = kind;
      CHECK(multiscale_loss(only_full, target, cfg) == doctest::Approx(0.5 * frame_loss(kind, only_full.full, target)));
    }

    // Random pyramid against a hand-written weighted sum.
    ScalePyramid rnd{tp[0] + g.array({1, 4, 6}, -9, 9), tp[1] + g.array({1, 8, 12}, -9, 9),
                     tp[2] + g.array({1, 16, 24}, -9, 9)};
    const double by_hand = 0.2 * satd_oracle(rnd.quarter, tp[0]) + 0.3 * satd_oracle(rnd.half, tp[1]) +
                           0.5 * satd_oracle(rnd.full, tp[2]);
    CHECK(std::abs(multiscale_loss(rnd, target, LossConfig{}) - by_hand) < 1e-12 * by_hand);

    CHECK_THROWS_AS(multiscale_loss(rnd, g.samples(1, 16, 20), LossConfig{}), ShapeError);
  }

  TEST_CASE("loss kind names") {
    CHECK(to_string(LossKind::kL1) == "l1");
    CHECK(to_string(LossKind::kSatd) == "satd");
    CHECK(parse_loss_kind("satd") == LossKind::kSatd);
    CHECK(parse_loss_kind("l1") == LossKind::kL1);
    CHECK_THROWS_AS(parse_loss_kind("l2"), DomainError);
  }

  TEST_CASE("recorded multiscale loss matches the direct value and gradient") {
    Gen g(47);
    Array target = g.samples(1, 8, 8);
    std::array<Array, 3> preds{g.array({1, 2, 2}, 0, 255), g.array({1, 4, 4}, 0, 255), g.array({1, 8, 8}, 0, 255)};
    Tape t;
    TapePyramid p;
    for (std::size_t s = 0; s < 3; ++s) p.levels[s] = t.leaf(preds[s]);
    VarId loss = record_multiscale_loss(t, p, target, LossConfig{});
    ScalePyramid direct{preds[0], preds[1], preds[2]};
    CHECK(t.value(loss)[0] == doctest::Approx(multiscale_loss(direct, target, LossConfig{})).epsilon(1e-14));
    t.backward(loss);
    Array expect = satd_loss_backward(preds[2], target) * 0.5;
    CHECK(fkinterp::testing::max_abs_diff(t.grad(p.levels[2]), expect) < 1e-12);
  }
}
