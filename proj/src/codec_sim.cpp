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

#include "fkinterp/codec_sim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "fkinterp/error.hpp"
#include "fkinterp/interp_net.hpp"
#include "fkinterp/losses.hpp"
#include "fkinterp/ops.hpp"
#include "fkinterp/parallel.hpp"
#include "fkinterp/transform_quant.hpp"
#include "fkinterp/video_io.hpp"

namespace fkinterp {

// ---------------------------------------------------------------------------
// GOP structure

int temporal_layer(int poc_offset) {
  if (poc_offset < 1 || poc_offset > kGopSize) {
    throw DomainError("temporal_layer: POC offset " + std::to_string(poc_offset) + " outside [1, 16]");
  }
  if (poc_offset % 16 == 0) return 0;
  if (poc_offset % 8 == 0) return 1;
  if (poc_offset % 4 == 0) return 2;
  if (poc_offset % 2 == 0) return 3;
  return 4;
}

const std::array<int, kGopSize>& gop_coding_order() {
  static const std::array<int, kGopSize> order{16, 8, 4, 2, 1, 3, 6, 5, 7, 12, 10, 9, 11, 14, 13, 15};
  return order;
}

std::size_t coded_frame_count(std::size_t frame_count) {
  if (frame_count == 0) return 0;
  return 1 + (frame_count - 1) / kGopSize * kGopSize;
}

std::vector<int> coding_order(std::size_t frame_count) {
  std::vector<int> out;
  const std::size_t n = coded_frame_count(frame_count);
  if (n == 0) return out;
  out.push_back(0);
  for (std::size_t base = 0; base + kGopSize < n; base += kGopSize) {
    for (int off : gop_coding_order()) out.push_back(static_cast<int>(base) + off);
  }
  return out;
}

std::optional<int> pc_distance(int poc) {
  if (poc <= 0) return std::nullopt;
  const int off = (poc - 1) % kGopSize + 1;
  switch (temporal_layer(off)) {
    case 2: return 4;
    case 3: return 2;
    case 4: return 1;
    default: return std::nullopt;
  }
}

double rdo_lambda(int qp) {
  if (qp < 0 || qp > 51) throw DomainError("rdo_lambda: QP outside [0, 51]");
  return 0.85 * std::exp2((qp - 12) / 3.0);
}

std::vector<ListEntry> ReferenceLists::entries() const {
  std::vector<ListEntry> e;
  for (std::size_t i = 0; i < list0.size(); ++i) e.push_back({0, static_cast<int>(i), list0[i]});
  for (std::size_t i = 0; i < list1.size(); ++i) e.push_back({1, static_cast<int>(i), list1[i]});
  return e;
}

ReferenceLists build_reference_lists(int poc, const std::vector<int>& available) {
  std::vector<int> past, future;
  for (int p : available) {
    if (p < poc) past.push_back(p);
    if (p > poc) future.push_back(p);
  }
  std::sort(past.begin(), past.end(), std::greater<>());
  std::sort(future.begin(), future.end());
  ReferenceLists l;
  l.list0.assign(past.begin(), past.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(2, past.size())));
  l.list1.assign(future.begin(), future.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(2, future.size())));
  if (l.list0.empty() && l.list1.empty()) throw DomainError("build_reference_lists: no reference for POC " + std::to_string(poc));

  if (const auto d = pc_distance(poc)) {
    const auto has = [&](int p) { return std::find(available.begin(), available.end(), p) != available.end(); };
    if (has(poc - *d) && has(poc + *d)) {
      l.pc_sources = std::make_pair(poc - *d, poc + *d);
      ListEntry best{};
      int best_dist = -1;
      for (const ListEntry& e : l.entries()) {
        const int dist = std::abs(e.poc - poc);
        // entries() lists List0 first, so a strictly larger distance is needed
        // to move to List1; within a list the later (larger) index wins ties.
        if (dist > best_dist || (dist == best_dist && e.list == best.list && e.index > best.index)) {
          best = e;
          best_dist = dist;
        }
      }
      l.shared = best;
    }
  }
  return l;
}

PcGenerator make_pc_generator(const InterpNet& net) {
  return [&net](const Array& left, const Array& right, int qp_left, int qp_right) {
    Array out = net.interpolate(left, right, qp_left, qp_right).pyramid.full;
    for (double& v : out.values()) v = to_sample(v);
    return out;
  };
}

std::optional<Array> generate_pc_frame(int poc, const std::map<int, Array>& recon, const std::map<int, int>& qps,
                                       const PcGenerator& model) {
  const auto d = pc_distance(poc);
  if (!d) return std::nullopt;
  if (!model) throw DomainError("generate_pc_frame: no interpolation model");
  const int l = poc - *d, r = poc + *d;
  const auto il = recon.find(l), ir = recon.find(r);
  if (il == recon.end() || ir == recon.end()) {
    throw DomainError("generate_pc_frame: POC " + std::to_string(poc) + " needs reconstructions of POC " +
                      std::to_string(l) + " and " + std::to_string(r));
  }
  const auto ql = qps.find(l), qr = qps.find(r);
  if (ql == qps.end() || qr == qps.end()) throw DomainError("generate_pc_frame: missing source QP");
  const int qp = std::max(ql->second, qr->second);
  return model(il->second, ir->second, qp, qp);
}

int signed_exp_golomb_bits(int v) {
  const unsigned code = v > 0 ? 2u * static_cast<unsigned>(v) - 1u : 2u * static_cast<unsigned>(-v);
  int lead = 0;
  while ((code + 1u) >> (lead + 1)) ++lead;
  return 2 * lead + 1;
}

int index_bits(const ReferenceLists& lists, int list, int index) {
  const int n = static_cast<int>(list == 0 ? lists.list0.size() : lists.list1.size());
  if (index < 0 || index >= n) throw DomainError("index_bits: reference index out of range");
  const int list_flag = (!lists.list0.empty() && !lists.list1.empty()) ? 1 : 0;
  const int unary = n <= 1 ? 0 : (index < n - 1 ? index + 1 : n - 1);
  return list_flag + unary;
}

// ---------------------------------------------------------------------------
// SATD table

std::vector<const Array*> table_references(const ReferenceSet& refs) {
  std::vector<const Array*> out;
  for (const ListEntry& e : refs.lists.entries()) {
    const auto it = refs.pictures.find(e.poc);
    if (it == refs.pictures.end() || it->second == nullptr) {
      throw DomainError("reference POC " + std::to_string(e.poc) + " has no picture");
    }
    out.push_back(it->second);
  }
  if (refs.pc) out.push_back(refs.pc);
  return out;
}

SatdTable::SatdTable(const Array& current, const std::vector<const Array*>& refs, int range, std::size_t threads)
    : range_(range) {
  require_rank3(current, "SatdTable");
  const std::size_t h = current.dim(1), w = current.dim(2);
  if (h % 8 != 0 || w % 8 != 0) throw ShapeError("SatdTable: picture dimensions must be multiples of 8");
  if (range < 0) throw DomainError("SatdTable: negative search range");
  blocks_h_ = h / 8;
  blocks_w_ = w / 8;
  const std::size_t side = 2 * static_cast<std::size_t>(range) + 1;
  mvs_ = side * side;
  levels_.resize(refs.size());

  std::vector<std::int32_t> cur(h * w);
  for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = static_cast<std::int32_t>(current[i]);

  parallel_for(refs.size(), threads, [&](std::size_t r) {
    require_same_shape(current, *refs[r], "SatdTable reference");
    const std::size_t pad = static_cast<std::size_t>(range);
    const Array padded = ops::pad_replicate(*refs[r], ops::Margins::uniform(pad));
    const std::size_t pw = padded.dim(2);
    std::vector<std::int32_t> ref(padded.size());
    for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = static_cast<std::int32_t>(padded[i]);

    auto& lv = levels_[r];
    lv[0].assign(mvs_ * blocks_h_ * blocks_w_, 0);
    std::int32_t blk[64];
    for (std::size_t m = 0; m < mvs_; ++m) {
      const std::size_t dy = m / side, dx = m % side;  // offsets already shifted by +range
      for (std::size_t by = 0; by < blocks_h_; ++by) {
        for (std::size_t bx = 0; bx < blocks_w_; ++bx) {
          for (std::size_t y = 0; y < 8; ++y) {
            const std::int32_t* c = cur.data() + (by * 8 + y) * w + bx * 8;
            const std::int32_t* p = ref.data() + (by * 8 + y + dy) * pw + bx * 8 + dx;
            for (std::size_t x = 0; x < 8; ++x) blk[y * 8 + x] = c[x] - p[x];
          }
          lv[0][(m * blocks_h_ + by) * blocks_w_ + bx] = static_cast<std::int32_t>(satd8x8(blk));
        }
      }
    }
    for (std::size_t k = 1; k < 4; ++k) {
      const std::size_t ph = blocks_h_ >> (k - 1), pwk = blocks_w_ >> (k - 1);
      const std::size_t bh = blocks_h_ >> k, bw = blocks_w_ >> k;
      lv[k].assign(mvs_ * bh * bw, 0);
      for (std::size_t m = 0; m < mvs_; ++m) {
        for (std::size_t by = 0; by < bh; ++by) {
          for (std::size_t bx = 0; bx < bw; ++bx) {
            const auto at = [&](std::size_t yy, std::size_t xx) { return lv[k - 1][(m * ph + yy) * pwk + xx]; };
            lv[k][(m * bh + by) * bw + bx] =
                at(2 * by, 2 * bx) + at(2 * by, 2 * bx + 1) + at(2 * by + 1, 2 * bx) + at(2 * by + 1, 2 * bx + 1);
          }
        }
      }
    }
  });
}

std::int64_t SatdTable::cu_satd(std::size_t r, std::size_t y, std::size_t x, std::size_t size, MotionVector mv) const {
  std::size_t k = 0;
  while ((std::size_t{8} << k) < size) ++k;
  if ((std::size_t{8} << k) != size || k > 3) throw DomainError("SatdTable: CU size must be 8, 16, 32 or 64");
  if (std::abs(mv.dx) > range_ || std::abs(mv.dy) > range_) throw DomainError("SatdTable: motion vector out of range");
  const std::size_t bh = blocks_h_ >> k, bw = blocks_w_ >> k;
  const std::size_t by = y / size, bx = x / size;
  if (y % size != 0 || x % size != 0 || by >= bh || bx >= bw) throw DomainError("SatdTable: CU outside the picture");
  const std::size_t side = 2 * static_cast<std::size_t>(range_) + 1;
  const std::size_t m = static_cast<std::size_t>(mv.dy + range_) * side + static_cast<std::size_t>(mv.dx + range_);
  return levels_.at(r)[k][(m * bh + by) * bw + bx];
}

// ---------------------------------------------------------------------------
// RDO

const Array& choice_picture(const ReferenceSet& refs, const PredictionChoice& c) {
  if (c.use_pc) {
    if (!refs.pc) throw DomainError("prediction uses the PC picture but none is available");
    return *refs.pc;
  }
  const std::vector<int>& list = c.list == 0 ? refs.lists.list0 : refs.lists.list1;
  if (c.index < 0 || static_cast<std::size_t>(c.index) >= list.size()) throw DomainError("reference index out of range");
  return *refs.pictures.at(list[static_cast<std::size_t>(c.index)]);
}

namespace {

struct LeafSearch {
  CuDecision best;
  bool found = false;
};

CuDecision best_leaf(const ReferenceSet& refs, const SatdTable& table, const RdoOptions& opt, std::size_t y,
                     std::size_t x, std::size_t size) {
  const int range = std::min(opt.search_range, table.range());
  const std::vector<ListEntry> entries = refs.lists.entries();
  const bool pc_on = opt.allow_pc && refs.pc != nullptr && refs.lists.shared.has_value();
  CuDecision best{y, x, size, {}, std::numeric_limits<double>::infinity()};
  int best_len = 0;
  for (std::size_t slot = 0; slot < entries.size(); ++slot) {
    const ListEntry& e = entries[slot];
    const bool shared = refs.lists.shared && refs.lists.shared->list == e.list && refs.lists.shared->index == e.index;
    const double side = index_bits(refs.lists, e.list, e.index) + ((shared && pc_on) ? 1.0 : 0.0);
    for (int alt = 0; alt < ((shared && pc_on) ? 2 : 1); ++alt) {
      const std::size_t r = alt == 0 ? slot : entries.size();
      bool improved_here = false;
      for (int dy = -range; dy <= range; ++dy) {
        for (int dx = -range; dx <= range; ++dx) {
          const double bits = side + signed_exp_golomb_bits(dx) + signed_exp_golomb_bits(dy);
          const double cost = static_cast<double>(table.cu_satd(r, y, x, size, {dx, dy})) + opt.lambda * bits;
          const int len = std::abs(dx) + std::abs(dy);
          // Within one reference ties go to the shorter vector (raster order
          // otherwise); across references the earlier candidate is kept.
          if (cost < best.cost || (improved_here && cost == best.cost && len < best_len)) {
            best.cost = cost;
            best.pred = {e.list, e.index, alt == 1, {dx, dy}};
            best_len = len;
            improved_here = true;
          }
        }
      }
    }
  }
  return best;
}

}  // namespace

RdoResult cu_rdo_block(const Array& current, const ReferenceSet& refs, const SatdTable& table, const RdoOptions& opt,
                       std::size_t y, std::size_t x, std::size_t size) {
  const std::size_t h = current.dim(1), w = current.dim(2);
  RdoResult out;
  if (y >= h || x >= w) return out;
  const bool fits = y + size <= h && x + size <= w;
  if (fits) {
    out.cus.push_back(best_leaf(refs, table, opt, y, x, size));
    out.cost = out.cus.back().cost;
  }
  if (size == 8) return out;  // smallest CU: no split flag
  RdoResult split;
  const std::size_t half = size / 2;
  for (std::size_t q = 0; q < 4; ++q) {
    RdoResult child = cu_rdo_block(current, refs, table, opt, y + (q / 2) * half, x + (q % 2) * half, half);
    split.cost += child.cost;
    split.split_bits += child.split_bits;
    split.cus.insert(split.cus.end(), child.cus.begin(), child.cus.end());
  }
  if (!fits) return split;  // implicit split at the picture border
  // One split-flag bit is signalled either way.
  out.cost += opt.lambda;
  out.split_bits = 1;
  split.cost += opt.lambda;
  split.split_bits += 1;
  return split.cost < out.cost ? split : out;
}

RdoResult cu_rdo(const Array& current, const ReferenceSet& refs, const SatdTable& table, const RdoOptions& opt) {
  require_rank3(current, "cu_rdo");
  RdoResult total;
  for (std::size_t y = 0; y < current.dim(1); y += 64) {
    for (std::size_t x = 0; x < current.dim(2); x += 64) {
      RdoResult r = cu_rdo_block(current, refs, table, opt, y, x, 64);
      total.cost += r.cost;
      total.split_bits += r.split_bits;
      total.cus.insert(total.cus.end(), r.cus.begin(), r.cus.end());
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Frame coding

double psnr_from_sse(double sse, std::size_t samples) {
  if (sse <= 0.0) return 100.0;
  return 10.0 * std::log10(255.0 * 255.0 * static_cast<double>(samples) / sse);
}

namespace {

void require_codable(const Array& frame) {
  require_rank3(frame, "codec");
  if (frame.dim(0) != 1) throw ShapeError("codec: luma planes [1,H,W] expected");
  if (frame.dim(1) % 8 != 0 || frame.dim(2) % 8 != 0) {
    throw ShapeError("codec: picture dimensions must be multiples of 8, got " + shape_to_string(frame.shape()));
  }
}

std::size_t size_slot(std::size_t size) {
  for (std::size_t i = 0; i < kCuSizes.size(); ++i) {
    if (kCuSizes[i] == size) return i;
  }
  throw DomainError("unexpected CU size");
}

Array predict(const ReferenceSet& refs, const std::vector<CuDecision>& cus, std::size_t h, std::size_t w) {
  Array pred({1, h, w});
  for (const CuDecision& cu : cus) {
    const Array& ref = choice_picture(refs, cu.pred);
    for (std::size_t y = 0; y < cu.size; ++y) {
      for (std::size_t x = 0; x < cu.size; ++x) {
        pred.at(0, cu.y + y, cu.x + x) = sample_clamped(ref, static_cast<long>(cu.y + y) + cu.pred.mv.dy,
                                                        static_cast<long>(cu.x + x) + cu.pred.mv.dx);
      }
    }
  }
  return pred;
}

// Quantizes frame - pred blockwise; fills levels and returns the reconstruction.
Array code_residue(const Array& frame, const Array& pred, double qstep, std::vector<std::int32_t>& levels) {
  const std::size_t h = frame.dim(1), w = frame.dim(2);
  levels.assign(h * w, 0);
  Array rec({1, h, w});
  double res[64], deq[64];
  std::size_t block = 0;
  for (std::size_t by = 0; by < h; by += 8) {
    for (std::size_t bx = 0; bx < w; bx += 8, ++block) {
      for (std::size_t y = 0; y < 8; ++y) {
        for (std::size_t x = 0; x < 8; ++x) res[y * 8 + x] = frame.at(0, by + y, bx + x) - pred.at(0, by + y, bx + x);
      }
      std::int32_t* lv = levels.data() + block * 64;
      quantize_block8(res, qstep, lv);
      dequantize_block8(lv, qstep, deq);
      for (std::size_t y = 0; y < 8; ++y) {
        for (std::size_t x = 0; x < 8; ++x) {
          rec.at(0, by + y, bx + x) = std::clamp(std::round(pred.at(0, by + y, bx + x) + deq[y * 8 + x]), 0.0, 255.0);
        }
      }
    }
  }
  return rec;
}

Array reconstruct(const Array& pred, const std::vector<std::int32_t>& levels, double qstep) {
  const std::size_t h = pred.dim(1), w = pred.dim(2);
  if (levels.size() != h * w) throw FormatError("decoder: level count does not match the picture size");
  Array rec({1, h, w});
  double deq[64];
  std::size_t block = 0;
  for (std::size_t by = 0; by < h; by += 8) {
    for (std::size_t bx = 0; bx < w; bx += 8, ++block) {
      dequantize_block8(levels.data() + block * 64, qstep, deq);
      for (std::size_t y = 0; y < 8; ++y) {
        for (std::size_t x = 0; x < 8; ++x) {
          rec.at(0, by + y, bx + x) = std::clamp(std::round(pred.at(0, by + y, bx + x) + deq[y * 8 + x]), 0.0, 255.0);
        }
      }
    }
  }
  return rec;
}

double sum_abs(const std::vector<std::int32_t>& v) {
  double s = 0.0;
  for (std::int32_t x : v) s += std::abs(x);
  return s;
}

double sse_of(const Array& a, const Array& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

EncodedFrame encode_intra_frame(const Array& frame, int qp) {
  require_codable(frame);
  EncodedFrame out;
  const Array pred({1, frame.dim(1), frame.dim(2)}, 128.0);
  out.record.qp = qp;
  out.record.intra = true;
  out.reconstruction = code_residue(frame, pred, quant_step(qp), out.record.levels);
  out.stats.residue_bits = sum_abs(out.record.levels);
  out.stats.rate = out.stats.residue_bits;
  out.stats.sse = sse_of(frame, out.reconstruction);
  out.stats.psnr = psnr_from_sse(out.stats.sse, frame.size());
  return out;
}

EncodedFrame encode_frame_sim(const Array& frame, const ReferenceSet& refs, int qp, int search_range,
                              std::size_t threads) {
  require_codable(frame);
  const double lambda = rdo_lambda(qp);
  const SatdTable table(frame, table_references(refs), search_range, threads);
  const RdoOptions opt{lambda, search_range, true};
  const RdoResult rdo = cu_rdo(frame, refs, table, opt);
  const RdoResult base = cu_rdo(frame, refs, table, {lambda, search_range, false});

  EncodedFrame out;
  out.record.qp = qp;
  out.record.cus = rdo.cus;
  const Array pred = predict(refs, rdo.cus, frame.dim(1), frame.dim(2));
  out.reconstruction = code_residue(frame, pred, quant_step(qp), out.record.levels);

  FrameStats& st = out.stats;
  st.pc_available = refs.pc != nullptr && refs.lists.shared.has_value();
  st.residue_bits = sum_abs(out.record.levels);
  double side = static_cast<double>(rdo.split_bits);
  for (const CuDecision& cu : rdo.cus) {
    const bool shared = refs.lists.shared && refs.lists.shared->list == cu.pred.list &&
                        refs.lists.shared->index == cu.pred.index;
    side += index_bits(refs.lists, cu.pred.list, cu.pred.index) + signed_exp_golomb_bits(cu.pred.mv.dx) +
            signed_exp_golomb_bits(cu.pred.mv.dy) + ((shared && st.pc_available) ? 1 : 0);
    ++st.cu_histogram[size_slot(cu.size)];
    if (cu.pred.use_pc) ++st.pc_cus;
  }
  st.side_bits = side;
  st.rate = st.residue_bits + st.side_bits;
  st.cus = rdo.cus.size();
  st.sse = sse_of(frame, out.reconstruction);
  st.psnr = psnr_from_sse(st.sse, frame.size());
  st.rdo_cost = rdo.cost;
  st.baseline_rdo_cost = base.cost;
  for (const CuDecision& cu : base.cus) {
    if (refs.lists.shared && refs.lists.shared->list == cu.pred.list && refs.lists.shared->index == cu.pred.index) {
      ++st.baseline_shared_cus;
    }
  }
  return out;
}

double RdPoint::mean_cu_size() const {
  double n = 0.0, s = 0.0;
  for (std::size_t i = 0; i < kCuSizes.size(); ++i) {
    n += static_cast<double>(cu_histogram[i]);
    s += static_cast<double>(cu_histogram[i] * kCuSizes[i]);
  }
  return n > 0.0 ? s / n : 0.0;
}

namespace {

void check_sequence(const std::vector<Array>& frames) {
  if (frames.size() < static_cast<std::size_t>(kGopSize) + 1) {
    throw DomainError("run_sequence: need at least 17 frames, got " + std::to_string(frames.size()));
  }
  for (const Array& f : frames) {
    require_codable(f);
    require_same_shape(f, frames[0], "run_sequence frames");
  }
}

std::vector<int> keys_of(const std::map<int, Array>& m) {
  std::vector<int> k;
  for (const auto& [p, _] : m) k.push_back(p);
  return k;
}

ReferenceSet make_reference_set(int poc, const std::map<int, Array>& recon) {
  ReferenceSet refs;
  refs.lists = build_reference_lists(poc, keys_of(recon));
  for (const ListEntry& e : refs.lists.entries()) refs.pictures[e.poc] = &recon.at(e.poc);
  return refs;
}

}  // namespace

SequenceRun run_sequence(const std::vector<Array>& frames, const SequenceConfig& cfg, const PcGenerator& model) {
  check_sequence(frames);
  if (cfg.with_pc && !model) throw DomainError("run_sequence: with_pc requires an interpolation model");
  if (cfg.qps.empty()) throw DomainError("run_sequence: empty QP set");
  const std::vector<int> order = coding_order(frames.size());
  const std::size_t n = coded_frame_count(frames.size());

  SequenceRun run;
  for (int qp : cfg.qps) {
    std::map<int, Array> recon;
    std::map<int, int> qps;
    std::vector<FrameStats> stats;
    std::vector<FrameRecord> records;
    RdPoint pt;
    pt.qp = qp;
    pt.lambda = rdo_lambda(qp);
    double psnr_sum = 0.0;
    for (int poc : order) {
      const Array& frame = frames[static_cast<std::size_t>(poc)];
      EncodedFrame enc;
      if (poc == 0) {
        enc = encode_intra_frame(frame, qp);
      } else {
        ReferenceSet refs = make_reference_set(poc, recon);
        std::optional<Array> pc;
        if (cfg.with_pc) pc = generate_pc_frame(poc, recon, qps, model);
        if (pc) refs.pc = &*pc;
        enc = encode_frame_sim(frame, refs, qp, cfg.search_range, cfg.threads);
        enc.stats.layer = temporal_layer((poc - 1) % kGopSize + 1);
        pt.rdo_cost += enc.stats.rdo_cost;
        pt.baseline_rdo_cost += enc.stats.baseline_rdo_cost;
        pt.baseline_shared_cus += enc.stats.baseline_shared_cus;
        for (std::size_t i = 0; i < 4; ++i) pt.cu_histogram[i] += enc.stats.cu_histogram[i];
        pt.inter_cus += enc.stats.cus;
        if (enc.stats.pc_available) {
          pt.pc_eligible_cus += enc.stats.cus;
          pt.pc_cus += enc.stats.pc_cus;
        }
      }
      enc.stats.poc = poc;
      enc.record.poc = poc;
      pt.rate += enc.stats.rate;
      psnr_sum += enc.stats.psnr;
      recon[poc] = enc.reconstruction;
      qps[poc] = qp;
      stats.push_back(enc.stats);
      records.push_back(std::move(enc.record));
    }
    pt.psnr = psnr_sum / static_cast<double>(n);
    std::vector<Array> by_poc(n);
    for (auto& [p, a] : recon) by_poc[static_cast<std::size_t>(p)] = std::move(a);
    run.points.push_back(pt);
    run.frames.push_back(std::move(stats));
    run.records.push_back(std::move(records));
    run.reconstructions.push_back(std::move(by_poc));
  }
  return run;
}

std::vector<Array> decode_sequence(const std::vector<FrameRecord>& records, std::size_t height, std::size_t width,
                                   bool with_pc, const PcGenerator& model) {
  std::map<int, Array> recon;
  std::map<int, int> qps;
  for (const FrameRecord& rec : records) {
    const double qstep = quant_step(rec.qp);
    Array pred;
    if (rec.intra) {
      pred = Array({1, height, width}, 128.0);
    } else {
      ReferenceSet refs = make_reference_set(rec.poc, recon);
      std::optional<Array> pc;
      if (with_pc) pc = generate_pc_frame(rec.poc, recon, qps, model);
      if (pc) refs.pc = &*pc;
      pred = predict(refs, rec.cus, height, width);
    }
    recon[rec.poc] = reconstruct(pred, rec.levels, qstep);
    qps[rec.poc] = rec.qp;
  }
  std::vector<Array> out;
  for (auto& [p, a] : recon) out.push_back(std::move(a));
  return out;
}

// ---------------------------------------------------------------------------
// BD-rate

BdCurve curve_of(const SequenceRun& run) {
  BdCurve c;
  for (const RdPoint& p : run.points) c.push_back({p.rate, p.psnr});
  return c;
}

namespace {

Eigen::Vector4d fit_cubic(const BdCurve& c) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(c.size()), 4);
  Eigen::VectorXd b(static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double p = c[i].psnr;
    const auto r = static_cast<Eigen::Index>(i);
    a(r, 0) = 1.0;
    a(r, 1) = p;
    a(r, 2) = p * p;
    a(r, 3) = p * p * p;
    b(r) = std::log10(c[i].rate);
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 4) throw DomainError("bd_rate: degenerate curve (fewer than 4 distinct PSNR values)");
  return qr.solve(b);
}

double integral(const Eigen::Vector4d& k, double lo, double hi) {
  const auto prim = [&](double x) { return k(0) * x + k(1) * x * x / 2 + k(2) * x * x * x / 3 + k(3) * x * x * x * x / 4; };
  return prim(hi) - prim(lo);
}

void check_curve(const BdCurve& c, const char* which) {
  if (c.size() < 4) throw DomainError(std::string("bd_rate: ") + which + " curve needs at least 4 points");
  for (const RatePoint& p : c) {
    if (!(p.rate > 0.0) || !std::isfinite(p.rate) || !std::isfinite(p.psnr)) {
      throw DomainError(std::string("bd_rate: ") + which + " curve has a non-positive or non-finite point");
    }
  }
}

}  // namespace

double bd_rate(const BdCurve& anchor, const BdCurve& test) {
  check_curve(anchor, "anchor");
  check_curve(test, "test");
  const auto range = [](const BdCurve& c) {
    double lo = c[0].psnr, hi = c[0].psnr;
    for (const RatePoint& p : c) {
      lo = std::min(lo, p.psnr);
      hi = std::max(hi, p.psnr);
    }
    return std::make_pair(lo, hi);
  };
  const auto [alo, ahi] = range(anchor);
  const auto [tlo, thi] = range(test);
  const double lo = std::max(alo, tlo), hi = std::min(ahi, thi);
  if (!(hi > lo)) throw DomainError("bd_rate: PSNR ranges do not overlap");
  const Eigen::Vector4d ka = fit_cubic(anchor), kt = fit_cubic(test);
  const double diff = (integral(kt, lo, hi) - integral(ka, lo, hi)) / (hi - lo);
  return 100.0 * (std::pow(10.0, diff) - 1.0);
}

}  // namespace fkinterp
