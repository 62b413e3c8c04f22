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
#include <limits>
#include <numbers>

#include "fkinterp/error.hpp"
#include "fkinterp/grad_check.hpp"
#include "fkinterp/interp_net.hpp"
#include "fkinterp/optimizer.hpp"
#include "fkinterp/trainer.hpp"
#include "test_support.hpp"

using namespace fkinterp;
using fkinterp::testing::Gen;
using fkinterp::testing::max_abs_diff;
using fkinterp::testing::TempDir;

namespace {

double psnr(const Array& a, const Array& b) {
  double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = se / static_cast<double>(a.size());
  return mse == 0 ? std::numeric_limits<double>::infinity() : 10 * std::log10(255.0 * 255.0 / mse);
}

Array crop(const Array& a, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  Array out({1, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out.at(0, y, x) = a.at(0, y0 + y, x0 + x);
  return out;
}

ClipSample sample_from_clip(const Clip& c, int ql, int qr) {
  ClipSample s;
  s.left = c.left;
  s.right = c.right;
  s.target = c.mid;
  s.qp_left = ql;
  s.qp_right = qr;
  return s;
}

std::vector<ClipSample> small_set(std::size_t count, std::size_t size, std::uint64_t seed) {
  std::vector<Clip> clips;
  for (std::size_t i = 0; i < 4; ++i)
    clips.push_back(synthesize_clip(seed + i, i % 2 ? MotionKind::kDeform : MotionKind::kRotate, size + 8));
  DatasetConfig dc;
  dc.count = count;
  dc.crop = size;
  dc.seed = seed;
  return build_training_set(clips, dc).samples;
}

LossConfig l1() {
  LossConfig c;
  c.kind = LossKind::kL1;
  return c;
}

// Loss of the tiny network as a pure function of its weights.
struct TinyProblem {
  NetConfig cfg = NetConfig::tiny();
  Array left, right, target;
  int ql = 30, qr = 36;

  double loss(const std::vector<Array>& weights) const {
    Parameters p = InterpNet(cfg, 1).parameters();
    for (std::size_t i = 0; i < weights.size(); ++i) p[i] = weights[i];
    InterpNet net(cfg, p);
    TrainingInstance inst{left, right, target, ql, qr, {}};
    return instance_gradient(net, inst, l1()).first;
  }
  std::vector<Array> grad(const std::vector<Array>& weights) const {
    Parameters p = InterpNet(cfg, 1).parameters();
    for (std::size_t i = 0; i < weights.size(); ++i) p[i] = weights[i];
    InterpNet net(cfg, p);
    TrainingInstance inst{left, right, target, ql, qr, {}};
    return instance_gradient(net, inst, l1()).second;
  }
};

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("network output shapes at the default size") {
    const NetConfig cfg = NetConfig::defaults();
    InterpNet net(cfg, 7);
    Gen g(61);
    Array l = g.samples(1, 37, 21), r = g.samples(1, 37, 21);
    Interpolation out = net.interpolate(l, r, 27, 37);
    CHECK(out.pyramid.full.shape() == Shape{1, 37, 21});
    CHECK(out.pyramid.half.shape() == Shape{1, 19, 11});
    CHECK(out.pyramid.quarter.shape() == Shape{1, 10, 6});
    CHECK(out.contributions.shape() == Shape{2, 37, 21});
    CHECK(out.weights.shape() == Shape{2, 37, 21});
    // Fields live on the padded frame: 48 x 32 at full resolution.
    for (std::size_t s = 0; s < 3; ++s) {
      const std::size_t n = cfg.kernel_lengths[s], div = std::size_t{4} >> s;
      const auto& k = out.fields[s].kernels;
      REQUIRE(k.vertical.size() == 2);
      CHECK(k.vertical[0].shape() == Shape{cfg.rank * n, 48 / div, 32 / div});
      CHECK(k.horizontal[1].shape() == Shape{cfg.rank * n, 48 / div, 32 / div});
      CHECK(out.fields[s].quality.shape() == Shape{2, 48 / div, 32 / div});
    }
    // Four kernel heads and one quality head per scale, each head_depth layers deep.
    std::size_t head_layers = 0;
    for (const auto& e : net.parameters().entries())
      if (e.name.starts_with("head.") && e.name.ends_with(".weight")) ++head_layers;
    CHECK(head_layers == 3 * 5 * cfg.head_depth);
    CHECK(net.parameters().get("head.s2.vl.conv3.weight").shape() == Shape{51, 32, 3, 3});
    CHECK_THROWS_AS(net.interpolate(l, g.samples(1, 37, 20), 27, 37), ShapeError);
  }

  TEST_CASE("QP map normalization") {
    CHECK(qp_map(0, 2, 3) == Array({1, 2, 3}, 0.0));
    CHECK(qp_map(51, 2, 3) == Array({1, 2, 3}, 1.0));
    CHECK(normalize_qp(17) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(qp_map(52, 1, 1), DomainError);
    CHECK_THROWS_AS(qp_map(-1, 1, 1), DomainError);
  }

  TEST_CASE("config validation and JSON round trip") {
    for (const NetConfig& c : {NetConfig::defaults(), NetConfig::toy(), NetConfig::tiny()}) {
      CHECK_NOTHROW(c.validate());
      CHECK(NetConfig::from_json(c.to_json()) == c);
    }
    NetConfig even = NetConfig::tiny();
    even.kernel_lengths[1] = 4;
    CHECK_THROWS_AS(even.validate(), DomainError);
    NetConfig shallow = NetConfig::tiny();
    shallow.depth = 1;
    shallow.widths = {2, 3};
    CHECK_THROWS_AS(shallow.validate(), DomainError);
    CHECK_THROWS(NetConfig::from_json("{\"depth\": \"four\"}"));
  }

  TEST_CASE("initial heads: identity tap, detail term, half quality") {
    const NetConfig cfg = NetConfig::toy();
    REQUIRE(cfg.rank == 2);
    InterpNet net(cfg, 9);
    Gen g(62);
    Array l = g.samples(1, 24, 24), r = g.samples(1, 24, 24);
    Interpolation out = net.interpolate(l, r, 30, 40);
    const double b5[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
    for (std::size_t s = 0; s < 3; ++s) {
      const std::size_t n = cfg.kernel_lengths[s];
      for (std::size_t t = 0; t < 2; ++t) {
        const Array& v = out.fields[s].kernels.vertical[t];
        const Array& h = out.fields[s].kernels.horizontal[t];
        for (std::size_t k = 0; k < 2 * n; ++k) {
          double ev = k == n / 2 ? 1.0 : 0.0, eh = ev;
          if (s > 0 && k >= n + n / 2 - 2 && k <= n + n / 2 + 2) {
            ev = b5[k - (n + n / 2 - 2)];
            eh = -ev;
          }
          const auto vc = v.channel(k), hc = h.channel(k);
          for (std::size_t i = 0; i < vc.size(); i += 7) {
            CHECK(std::abs(vc[i] - ev) < 1e-3);
            CHECK(std::abs(hc[i] - eh) < 1e-3);
          }
        }
      }
      for (double q : out.fields[s].quality.storage()) CHECK(std::abs(q - 0.5) < 1e-3);
    }
  }

  TEST_CASE("identical smooth references reproduce the frame at init") {
    Gen g(63);
    for (const NetConfig& cfg : {NetConfig::toy(), NetConfig::tiny()}) {
      InterpNet net(cfg, 13);
      Array f = g.smooth(40, 32);
      Interpolation out = net.interpolate(f, f, 32, 32);
      CHECK(psnr(out.pyramid.full, f) > 30.0);
    }
  }

  TEST_CASE("interpolation is deterministic for a fixed seed") {
    Gen g(64);
    Array l = g.samples(1, 16, 16), r = g.samples(1, 16, 16);
    InterpNet a(NetConfig::toy(), 5), b(NetConfig::toy(), 5), c(NetConfig::toy(), 6);
    CHECK(a.parameters() == b.parameters());
    CHECK_FALSE(a.parameters() == c.parameters());
    CHECK(a.interpolate(l, r, 22, 30).pyramid.full == b.interpolate(l, r, 22, 30).pyramid.full);
  }

  TEST_CASE("contributions sum to the synthesized frame") {
    Gen g(65);
    InterpNet net(NetConfig::toy(), 21);
    Array l = g.samples(1, 24, 16), r = g.samples(1, 24, 16);
    Interpolation out = net.interpolate(l, r, 25, 35);
    Array sum({1, 24, 16});
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = out.contributions[i] + out.contributions[sum.size() + i];
    CHECK(max_abs_diff(sum, out.pyramid.full) < 1e-9);
  }

  TEST_CASE("padding and cropping leave the region of interest unchanged") {
    // Identity taps with Q = (0.5, 0.5) at the finest scale and silent coarser
    // scales reduce synthesis to the plain average of the references.
    Gen g(66);
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t h = g.size(3, 21), w = g.size(3, 21);
      Array l = g.samples(1, h, w), r = g.samples(1, h, w);
      const std::vector<Array> parts{pad_to_multiple(l, 16), pad_to_multiple(r, 16)};
      Array refs = concat_channels(parts);
      CHECK(refs.dim(1) % 16 == 0);
      CHECK(refs.dim(2) % 16 == 0);
      CHECK(refs.dim(1) - h < 16);
      const std::size_t ph = refs.dim(1), pw = refs.dim(2);
      auto fk = FactorizedKernelField::delta(2, 5, ph, pw);
      Array q({2, ph, pw}, 0.5);
      Array carry({1, ph, pw});
      Array out = qa_fk_synthesize_scale(refs, fk, q, carry);
      Array expect({1, h, w});
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) expect.at(0, i, j) = 0.5 * (l.at(0, i, j) + r.at(0, i, j));
      CHECK(max_abs_diff(crop(out, 0, 0, h, w), expect) < 1e-12);
    }
  }

  TEST_CASE("gradient audit: every parameter receives gradient") {
    Gen g(67);
    InterpNet net(NetConfig::toy(), 4);
    TrainingInstance inst{g.samples(1, 32, 32), g.samples(1, 32, 32), g.samples(1, 32, 32), 27, 33, {}};
    auto [loss, grads] = instance_gradient(net, inst, LossConfig{});
    CHECK(std::isfinite(loss));
    REQUIRE(grads.size() == net.parameters().size());
    for (std::size_t i = 0; i < grads.size(); ++i) {
      INFO(net.parameters().name(i));
      CHECK(grads[i].shape() == net.parameters()[i].shape());
      double mag = 0;
      for (double v : grads[i].storage()) mag = std::max(mag, std::abs(v));
      CHECK(mag > 0.0);
    }
  }

  TEST_CASE("end-to-end gradient of the tiny network") {
    Gen g(68);
    TinyProblem prob;
    prob.left = g.samples(1, 8, 8);
    prob.right = g.samples(1, 8, 8);
    prob.target = g.samples(1, 8, 8);
    // Spread the head outputs away from the identity so no term is trivially zero.
    InterpNet net(prob.cfg, 17);
    std::vector<Array> w;
    for (const auto& e : net.parameters().entries()) {
      Array a = e.value;
      if (e.name.starts_with("head.")) a += g.array(a.shape(), -0.05, 0.05);
      w.push_back(std::move(a));
    }
    const std::vector<Array> analytic = prob.grad(w);
    const double f0 = prob.loss(w), h = 1e-5;
    // L1 and ReLU make the loss piecewise smooth. An entry whose one-sided
    // differences disagree sits on a kink; there the analytic value must lie
    // between them. Everywhere else it must match the central difference.
    std::size_t probed = 0, kinks = 0;
    double worst = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (int trial = 0; trial < 4; ++trial) {
        const std::size_t k = g.size(0, w[i].size() - 1);
        const double saved = w[i][k];
        w[i][k] = saved + h;
        const double fp = prob.loss(w);
        w[i][k] = saved - h;
        const double fm = prob.loss(w);
        w[i][k] = saved;
        const double dr = (fp - f0) / h, dl = (f0 - fm) / h, dc = (fp - fm) / (2 * h), an = analytic[i][k];
        const double scale = std::max({std::abs(an), std::abs(dc), 1e-2});
        ++probed;
        if (std::abs(dr - dl) > 1e-3 * scale) {
          ++kinks;
          CHECK(an >= std::min(dl, dr) - 1e-5 * scale);
          CHECK(an <= std::max(dl, dr) + 1e-5 * scale);
        } else {
          worst = std::max(worst, std::abs(an - dc) / scale);
        }
      }
    }
    CHECK(kinks * 10 < probed);
    CHECK(worst < 1e-5);
  }

  TEST_CASE("AdaMax: zero gradient leaves parameters unchanged") {
    InterpNet net(NetConfig::tiny(), 2);
    const Parameters before = net.parameters();
    AdamaxState st = AdamaxState::zeros_like(before);
    std::vector<Array> zero;
    for (const auto& e : before.entries()) zero.emplace_back(e.value.shape());
    adamax_step(net.parameters(), zero, st, 1e-3);
    CHECK(net.parameters() == before);
    CHECK(st.t == 1);
  }

  TEST_CASE("AdaMax: first step and constant gradients move by lr * sign") {
    Gen g(69);
    Parameters p;
    p.add("a", g.array({7}));
    p.add("b", g.array({2, 3}));
    const Parameters start = p;
    std::vector<Array> grads{g.array_away_from_zero({7}, 0.1), g.array_away_from_zero({2, 3}, 0.1)};
    AdamaxState st = AdamaxState::zeros_like(p);
    const double lr = 0.01;
    // Under a constant gradient m_t = g (1 - b1^t) and u_t = |g|, so every
    // bias-corrected update is exactly lr * sign(g).
    for (int step = 1; step <= 25; ++step) {
      adamax_step(p, grads, st, lr);
      for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t k = 0; k < p[i].size(); ++k) {
          const double expect = start[i][k] - step * lr * (grads[i][k] > 0 ? 1.0 : -1.0);
          CHECK(std::abs(p[i][k] - expect) < 1e-12);
          CHECK(st.u[i][k] == doctest::Approx(std::abs(grads[i][k])));
        }
    }
    CHECK(st.t == 25);
  }

  TEST_CASE("AdaMax: lr 0 is the identity and non-finite gradients are rejected") {
    Gen g(70);
    Parameters p;
    p.add("w", g.array({4}));
    const Parameters start = p;
    AdamaxState st = AdamaxState::zeros_like(p);
    adamax_step(p, {g.array({4})}, st, 0.0);
    CHECK(p == start);

    Array bad = g.array({4});
    bad[2] = std::numeric_limits<double>::quiet_NaN();
    const AdamaxState saved = st;
    CHECK_THROWS_AS(adamax_step(p, {bad}, st, 1e-3), NumericError);
    CHECK(p == start);
    CHECK(st == saved);
    CHECK_THROWS_AS(adamax_step(p, {Array({5})}, st, 1e-3), ShapeError);
  }

  TEST_CASE("AdaMax: u never decreases under constant-magnitude gradients") {
    Gen g(71);
    Parameters p;
    p.add("w", g.array({6}));
    AdamaxState st = AdamaxState::zeros_like(p);
    Array prev({6});
    for (int step = 0; step < 30; ++step) {
      Array grad({6});
      for (double& v : grad.storage()) v = g.coin() ? 0.3 : -0.3;
      adamax_step(p, {grad}, st, 1e-3);
      for (std::size_t k = 0; k < 6; ++k) CHECK(st.u[0][k] >= prev[k]);
      prev = st.u[0];
    }
  }

  TEST_CASE("synthetic clips: static and translating") {
    MotionParams still;
    Clip c = synthesize_clip(5, still, 24, 20);
    CHECK(c.left == c.mid);
    CHECK(c.right == c.mid);

    MotionParams tr;
    tr.dx = 4;
    tr.dy = -2;
    Clip m = synthesize_clip(5, tr, 24, 20);
    // mid(y, x) samples the texture where left(y + 1, x - 2) does.
    for (std::size_t y = 0; y + 1 < 24; ++y)
      for (std::size_t x = 2; x < 20; ++x) CHECK(m.mid.at(0, y, x) == m.left.at(0, y + 1, x - 2));
    for (std::size_t y = 0; y + 2 < 24; ++y)
      for (std::size_t x = 4; x < 20; ++x) CHECK(m.right.at(0, y, x) == m.left.at(0, y + 2, x - 4));
    for (double v : m.left.storage()) {
      CHECK(v == std::round(v));
      CHECK(v >= 0.0);
      CHECK(v <= 255.0);
    }
  }

  TEST_CASE("synthetic clips: rotation matches an independent warp") {
    MotionParams rot;
    rot.kind = MotionKind::kRotate;
    rot.angle_deg = 4.0;
    const std::size_t size = 64;
    Clip c = synthesize_clip(8, rot, size, size);
    ProceduralTexture tex(8);
    // The middle frame is the texture rotated by half the angle about the center.
    const double a = 2.0 * std::numbers::pi / 180.0, ctr = (size - 1) / 2.0;
    Array expect({1, size, size});
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double dy = y - ctr, dx = x - ctr;
        const double sy = ctr + dy * std::cos(a) - dx * std::sin(a);
        const double sx = ctr + dx * std::cos(a) + dy * std::sin(a);
        expect.at(0, y, x) = std::round(tex(sy, sx));
      }
    CHECK(psnr(c.mid, expect) > 40.0);
    CHECK(psnr(c.left, c.mid) < psnr(c.mid, expect));
  }

  TEST_CASE("motion kind names") {
    for (MotionKind k : {MotionKind::kTranslate, MotionKind::kRotate, MotionKind::kZoom, MotionKind::kDeform})
      CHECK(parse_motion_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_motion_kind("spin"), DomainError);
  }

  TEST_CASE("dataset: QP pairs, crops and reproducibility") {
    Gen g(72);
    for (int trial = 0; trial < 200; ++trial) {
      const int d = g.integer(0, 10);
      auto [a, b] = draw_qp_pair(static_cast<std::uint64_t>(trial), d);
      CHECK(std::abs(a - b) <= d);
      CHECK(a >= 0);
      CHECK(b <= kMaxQp);
    }
    std::vector<Clip> clips{synthesize_clip(1, MotionKind::kRotate, 64), synthesize_clip(2, MotionKind::kDeform, 64)};
    DatasetConfig dc;
    dc.count = 6;
    dc.crop = 40;
    dc.seed = 9;
    Dataset a = build_training_set(clips, dc), b = build_training_set(clips, dc);
    REQUIRE(a.samples.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      const ClipSample& s = a.samples[i];
      CHECK(s.target.shape() == Shape{1, 40, 40});
      CHECK(s.crop_y + 40 <= 64);
      CHECK(std::abs(s.qp_left - s.qp_right) <= 10);
      CHECK(s.left == b.samples[i].left);
      CHECK(s.target == crop(clips[s.clip_index].mid, s.crop_y, s.crop_x, 40, 40));
    }
    dc.seed = 10;
    CHECK_FALSE(build_training_set(clips, dc).samples[0].left == a.samples[0].left);
    dc.max_qp_diff = 11;
    CHECK_THROWS_AS(build_training_set(clips, dc), DomainError);
  }

  TEST_CASE("dataset: flow filter") {
    MotionParams still;
    DatasetConfig dc;
    dc.count = 8;
    dc.crop = 48;
    Dataset ok = build_training_set({synthesize_clip(3, still, 64, 64)}, dc);
    CHECK(ok.rejected == 0);

    MotionParams fast;
    fast.dx = 64;
    dc.attempts_per_sample = 3;
    CHECK_THROWS_AS(build_training_set({synthesize_clip(3, fast, 96, 96)}, dc), DomainError);
  }

  TEST_CASE("augmentation: swap, flip and crop") {
    MotionParams tr;
    tr.dx = 2;
    const ClipSample s = sample_from_clip(synthesize_clip(4, tr, 40, 40), 25, 33);

    AugmentFlags f;
    f.swapped = true;
    f.crop_y = 3;
    f.crop_x = 5;
    TrainingInstance once = apply_augmentation(s, f, 32);
    CHECK(once.qp_left == 33);
    CHECK(once.left == crop(s.right, 3, 5, 32, 32));
    ClipSample back;
    back.left = once.left;
    back.right = once.right;
    back.target = once.target;
    back.qp_left = once.qp_left;
    back.qp_right = once.qp_right;
    AugmentFlags f2;
    f2.swapped = true;
    TrainingInstance twice = apply_augmentation(back, f2, 32);
    CHECK(twice.left == crop(s.left, 3, 5, 32, 32));
    CHECK(twice.qp_left == 25);

    // A horizontal flip turns a +2 px translation into a -2 px one.
    AugmentFlags fh;
    fh.flip_h = true;
    TrainingInstance flipped = apply_augmentation(s, fh, 40);
    for (std::size_t y = 0; y < 40; ++y)
      for (std::size_t x = 0; x + 1 < 40; ++x) CHECK(flipped.target.at(0, y, x) == flipped.left.at(0, y, x + 1));

    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      TrainingInstance t = augment(s, seed, 24);
      CHECK(t.flags.crop_y + 24 <= 40);
      CHECK(t.flags.crop_x + 24 <= 40);
      CHECK(t.target.shape() == Shape{1, 24, 24});
    }
    CHECK_THROWS_AS(augment(s, 1, 41), DomainError);
    TrainingInstance c = center_instance(s, 32);
    CHECK(c.flags.crop_y == 4);
    CHECK(c.target == crop(s.target, 4, 4, 32, 32));
  }

  TEST_CASE("learning-rate schedule") {
    TrainConfig tc;
    CHECK(tc.lr_at(0) == 1e-3);
    CHECK(tc.lr_at(29) == 1e-3);
    CHECK(tc.lr_at(30) == doctest::Approx(1e-4));
    CHECK(tc.lr_at(69) == doctest::Approx(1e-4));
  }

  TEST_CASE("train: trace, checkpoint and resume") {
    TempDir dir("train");
    const auto train_set = small_set(8, 24, 100);
    const auto val_set = small_set(2, 24, 200);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 4;
    tc.crop = 16;
    tc.seed = 3;
    tc.checkpoint_path = dir / "ck.fkc";
    tc.trace_path = dir / "trace.csv";

    InterpNet net(NetConfig::tiny(), 1);
    const TrainResult r1 = train(net, train_set, val_set, tc);
    REQUIRE(r1.trace.size() == 1);
    CHECK(r1.step == 2);
    CHECK(std::isfinite(r1.trace[0].train_loss));
    CHECK(read_trace(*tc.trace_path).size() == 1);

    // One more epoch from the checkpoint equals two epochs in one go.
    tc.epochs = 2;
    InterpNet resumed(NetConfig::tiny(), 99);
    const TrainResult r2 = train(resumed, train_set, val_set, tc, load_checkpoint(*tc.checkpoint_path));
    CHECK(r2.step == 4);
    REQUIRE(r2.trace.size() == 2);
    CHECK(r2.trace[0].train_loss == r1.trace[0].train_loss);

    TrainConfig fresh = tc;
    fresh.checkpoint_path.reset();
    fresh.trace_path.reset();
    InterpNet straight(NetConfig::tiny(), 1);
    const TrainResult r3 = train(straight, train_set, val_set, fresh);
    CHECK(straight.parameters() == resumed.parameters());
    CHECK(r3.trace[1].val_loss == r2.trace[1].val_loss);

    InterpNet other(NetConfig::toy(), 1);
    CHECK_THROWS_AS(train(other, train_set, val_set, tc, load_checkpoint(*tc.checkpoint_path)), CheckpointError);
  }

  TEST_CASE("train: thread count does not change the result") {
    const auto train_set = small_set(6, 24, 300);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 3;
    tc.crop = 16;
    InterpNet a(NetConfig::tiny(), 2), b(NetConfig::tiny(), 2);
    train(a, train_set, {}, tc);
    tc.threads = 3;
    train(b, train_set, {}, tc);
    CHECK(a.parameters() == b.parameters());
  }

  TEST_CASE("train: repeated steps on one sample lower its loss") {
    auto one = small_set(1, 16, 400);
    TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 1;
    tc.crop = 16;
    tc.lr = 1e-4;
    InterpNet net(NetConfig::toy(), 6);
    const double before = evaluate(net, one, tc.loss, 16);
    const TrainResult r = train(net, one, one, tc);
    CHECK(r.trace.back().val_loss < before);
  }

  TEST_CASE("train: divergence saves a checkpoint and throws") {
    TempDir dir("diverge");
    auto set = small_set(2, 16, 500);
    set[1].target[5] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 1;
    tc.crop = 16;
    tc.checkpoint_path = dir / "ck.fkc";
    InterpNet net(NetConfig::tiny(), 1);
    CHECK_THROWS_AS(train(net, set, {}, tc), DivergenceError);
    CHECK(std::filesystem::exists(*tc.checkpoint_path));

    TrainConfig bad = tc;
    bad.crop = 15;
    CHECK_THROWS_AS(train(net, small_set(1, 16, 1), {}, bad), ShapeError);
    CHECK_THROWS_AS(train(net, {}, {}, tc), DomainError);
  }

  TEST_CASE("trace CSV round trip") {
    TempDir dir("trace");
    std::vector<TraceRow> rows{{0, 1e-3, 12.5, 13.25}, {1, 1e-4, 0.1 + 0.2, 1.0 / 3.0}};
    write_trace(dir / "t.csv", rows);
    auto back = read_trace(dir / "t.csv");
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(back[i].epoch == rows[i].epoch);
      CHECK(back[i].lr == rows[i].lr);
      CHECK(back[i].train_loss == rows[i].train_loss);
      CHECK(back[i].val_loss == rows[i].val_loss);
    }
  }
}
