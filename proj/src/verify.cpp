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

#include "fkinterp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fkinterp/adaptive_conv.hpp"
#include "fkinterp/codec_sim.hpp"
#include "fkinterp/grad_check.hpp"
#include "fkinterp/losses.hpp"
#include "fkinterp/ops.hpp"

namespace fkinterp {
namespace {

class Source {
 public:
  explicit Source(std::uint64_t seed) : rng_(seed) {}
  Array uniform(const Shape& shape, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    Array a(shape);
    for (double& v : a.storage()) v = d(rng_);
    return a;
  }

 private:
  std::mt19937_64 rng_;
};

CheckResult make(std::string name, double measured, double tolerance) {
  return {std::move(name), measured, tolerance, std::isfinite(measured) && measured <= tolerance};
}

FactorizedKernelField field_from(const std::vector<Array>& in, std::size_t rank, std::size_t length) {
  FactorizedKernelField f;
  f.rank = rank;
  f.length = length;
  const std::size_t refs = in[0].dim(0);
  for (std::size_t t = 0; t < refs; ++t) {
    f.vertical.push_back(in[1 + t]);
    f.horizontal.push_back(in[1 + refs + t]);
  }
  return f;
}

std::vector<Array> flatten_grads(const Array& refs, const std::vector<Array>& v, const std::vector<Array>& h) {
  std::vector<Array> out{refs};
  out.insert(out.end(), v.begin(), v.end());
  out.insert(out.end(), h.begin(), h.end());
  return out;
}

void gradient_checks(Source& src, std::vector<CheckResult>& out) {
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  opt.max_entries = 40;

  const Array target = src.uniform({1, 8, 12}, 0, 255);
  // Keep pred - target away from zero so the l1 kinks are never crossed.
  Array pred = target + src.uniform({1, 8, 12}, 0.5, 3.0);
  auto l1 = grad_check([&](const std::vector<Array>& v) { return l1_loss(v[0], target); },
                       [&](const std::vector<Array>& v) { return std::vector<Array>{l1_loss_backward(v[0], target)}; },
                       {pred}, opt);
  out.push_back(make("gradient.l1_loss", l1.worst(), opt.tolerance));

  auto satd = grad_check(
      [&](const std::vector<Array>& v) { return satd_loss(v[0], target); },
      [&](const std::vector<Array>& v) { return std::vector<Array>{satd_loss_backward(v[0], target)}; },
      {src.uniform({1, 8, 12}, 0, 255)}, opt);
  out.push_back(make("gradient.satd_loss", satd.worst(), opt.tolerance));

  auto conv = grad_check_op(
      [](const std::vector<Array>& v) { return ops::conv2d_3x3(v[0], v[1], v[2]); },
      [](const std::vector<Array>& v, const Array& g) {
        auto r = ops::conv2d_3x3_backward(v[0], v[1], g);
        return std::vector<Array>{r.input, r.weights, r.bias};
      },
      {src.uniform({2, 6, 5}, -1, 1), src.uniform({3, 2, 3, 3}, -1, 1), src.uniform({3}, -1, 1)}, opt);
  out.push_back(make("gradient.conv2d_3x3", conv.worst(), opt.tolerance));

  const std::size_t n = 5, rank = 2;
  std::vector<Array> fin{src.uniform({2, 7, 6}, 0, 255)};
  for (int i = 0; i < 4; ++i) fin.push_back(src.uniform({rank * n, 7, 6}, -0.5, 0.5));
  auto fconv = grad_check_op(
      [&](const std::vector<Array>& v) { return factorized_conv(v[0], field_from(v, rank, n)); },
      [&](const std::vector<Array>& v, const Array& g) {
        auto r = factorized_conv_backward(v[0], field_from(v, rank, n), g);
        return flatten_grads(r.refs, r.vertical, r.horizontal);
      },
      fin, opt);
  out.push_back(make("gradient.factorized_conv", fconv.worst(), opt.tolerance));

  std::vector<Array> qin = fin;
  qin.push_back(src.uniform({2, 7, 6}, 0, 1));
  auto qa = grad_check_op(
      [&](const std::vector<Array>& v) {
        return qa_fk_synthesize_scale(v[0], field_from(v, rank, n), v[5], Array({1, 7, 6}));
      },
      [&](const std::vector<Array>& v, const Array& g) {
        auto r = qa_fk_synthesize_scale_backward(v[0], field_from(v, rank, n), v[5], g);
        auto all = flatten_grads(r.refs, r.vertical, r.horizontal);
        all.push_back(r.quality);
        return all;
      },
      qin, opt);
  out.push_back(make("gradient.quality_gated_synthesis", qa.worst(), opt.tolerance));
}

void factorization_check(Source& src, const VerifyOptions& options, std::vector<CheckResult>& out) {
  const std::size_t n = 5, rank = 3, h = 9, w = 10, refs_count = 2;
  const Array refs = src.uniform({refs_count, h, w}, 0, 255);
  // Exact rank-3 kernels: sums of three outer products per pixel.
  KernelField2D field;
  field.length = n;
  for (std::size_t t = 0; t < refs_count; ++t) {
    const Array a = src.uniform({rank * n, h, w}, -0.3, 0.3), b = src.uniform({rank * n, h, w}, -0.3, 0.3);
    Array k({n * n, h, w});
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t i = 0; i < rank; ++i)
          for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = 0; q < n; ++q) k.at(p * n + q, y, x) += a.at(i * n + p, y, x) * b.at(i * n + q, y, x);
    field.kernels.push_back(std::move(k));
  }
  FactorizedKernelField fk = factorize_field(field, rank);
  if (options.skip_rank2) {
    for (Array& v : fk.vertical)
      for (std::size_t p = n; p < 2 * n; ++p) std::ranges::fill(v.channel(p), 0.0);
  }
  const Array full = adaptive_conv(refs, field), sep = factorized_conv(refs, fk);
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    diff = std::max(diff, std::abs(full[i] - sep[i]));
    scale = std::max(scale, std::abs(full[i]));
  }
  out.push_back(make("factorization.rank3_equivalence", diff / std::max(scale, 1.0), 1e-9));
}

void transform_checks(std::vector<CheckResult>& out) {
  double ortho = 0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      int dot = 0;
      for (int k = 0; k < 8; ++k) dot += kHadamard8[i][k] * kHadamard8[j][k];
      ortho = std::max(ortho, std::abs(dot - (i == j ? 8.0 : 0.0)));
    }
  out.push_back(make("hadamard.orthogonality", ortho, 0.0));

  double calib = 0;
  const Array zero({1, 8, 8});
  for (double v : {0.25, -1.0, 3.5}) calib = std::max(calib, std::abs(satd_loss(zero, Array({1, 8, 8}, v)) - 64 * std::abs(v)));
  Array spike({1, 8, 8});
  spike[27] = 1.0;
  calib = std::max(calib, std::abs(satd_loss(zero, spike) - 64.0));
  out.push_back(make("satd.calibration", calib, 1e-12));
}

void gop_checks(std::vector<CheckResult>& out) {
  static constexpr int kLayers[kGopSize] = {0, 4, 3, 4, 2, 4, 3, 4, 1, 4, 3, 4, 2, 4, 3, 4};
  double bad_layers = 0;
  for (int off = 1; off <= kGopSize; ++off) bad_layers += temporal_layer(off) != kLayers[off % kGopSize];
  out.push_back(make("gop.temporal_layers", bad_layers, 0.0));

  double violations = 0;
  std::vector<int> coded;
  for (int poc : coding_order(33)) {
    if (poc > 0) {
      const ReferenceLists lists = build_reference_lists(poc, coded);
      for (const ListEntry& e : lists.entries())
        violations += std::find(coded.begin(), coded.end(), e.poc) == coded.end();
      violations += lists.list0.size() > 2 || lists.list1.size() > 2;
      if (lists.pc_sources) {
        for (int s : {lists.pc_sources->first, lists.pc_sources->second})
          violations += std::find(coded.begin(), coded.end(), s) == coded.end();
      }
    }
    coded.push_back(poc);
  }
  out.push_back(make("gop.coding_order_legality", violations, 0.0));
}

void bd_checks(std::vector<CheckResult>& out) {
  const BdCurve a{{100, 30.0}, {180, 33.0}, {330, 36.2}, {610, 39.1}, {1000, 41.5}};
  out.push_back(make("bdrate.identical_curves", std::abs(bd_rate(a, a)), 1e-9));
  double scaled = 0;
  for (double k : {0.9, 1.25}) {
    BdCurve b = a;
    for (auto& p : b) p.rate *= k;
    scaled = std::max(scaled, std::abs(bd_rate(a, b) - 100.0 * (k - 1.0)));
  }
  out.push_back(make("bdrate.constant_rate_ratio", scaled, 1e-6));
}

}  // namespace

std::vector<CheckResult> run_invariant_checks(const VerifyOptions& options) {
  Source src(options.seed);
  std::vector<CheckResult> out;
  gradient_checks(src, out);
  factorization_check(src, options, out);
  transform_checks(out);
  gop_checks(out);
  bd_checks(out);
  return out;
}

}  // namespace fkinterp
