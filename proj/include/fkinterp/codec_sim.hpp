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

// Inter-prediction coding simulator with an interpolated extra reference.
//
// Sequence structure: POC 0 is coded against a flat mid-grey prediction, then
// GOPs of 16 pictures follow in hierarchical-B order. Each inter picture has
// up to two past references (List0) and two future references (List1), nearest
// first. For temporal layers 2..4 an interpolated picture (the "PC" picture)
// built from the two coded neighbours at distance 4, 2 or 1 shares the index
// of the list entry farthest from the current picture; a per-CU flag selects
// which of the two pictures the index denotes.
//
// Luma only. Picture dimensions must be multiples of 8.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fkinterp/array.hpp"
#include "fkinterp/motion.hpp"

namespace fkinterp {

class InterpNet;

inline constexpr int kGopSize = 16;
inline constexpr std::array<std::size_t, 4> kCuSizes{64, 32, 16, 8};

/// Temporal layer of a POC offset within the GOP, offset in [1, 16].
int temporal_layer(int poc_offset);
/// Offsets 1..16 in coding order.
const std::array<int, kGopSize>& gop_coding_order();
/// Number of pictures actually coded out of `frame_count` (1 + 16k).
std::size_t coded_frame_count(std::size_t frame_count);
/// POCs of a sequence in coding order: 0, then each full GOP.
std::vector<int> coding_order(std::size_t frame_count);
/// Distance d such that the PC picture of `poc` interpolates POCs poc +- d;
/// nullopt for layers 0 and 1.
std::optional<int> pc_distance(int poc);

/// RDO Lagrange multiplier 0.85 * 2^((qp - 12) / 3).
double rdo_lambda(int qp);

struct ListEntry {
  int list = 0;   // 0 or 1
  int index = 0;  // position inside the list
  int poc = 0;
};

struct ReferenceLists {
  std::vector<int> list0;  // past POCs, nearest first
  std::vector<int> list1;  // future POCs, nearest first
  /// Entry whose index the PC picture shares (when one is available).
  std::optional<ListEntry> shared;
  /// POCs interpolated into the PC picture.
  std::optional<std::pair<int, int>> pc_sources;

  std::vector<ListEntry> entries() const;
};

/// Lists for `poc` given the set of already reconstructed POCs. The shared
/// entry is the one farthest from `poc`; ties prefer List0, then the larger
/// index.
ReferenceLists build_reference_lists(int poc, const std::vector<int>& available);

/// Produces a midpoint picture from two reconstructions and their QPs.
using PcGenerator = std::function<Array(const Array& left, const Array& right, int qp_left, int qp_right)>;

/// Wraps a network: interpolate, round and clip to 8-bit sample values.
PcGenerator make_pc_generator(const InterpNet& net);

/// PC picture for `poc`, or nullopt for layers <= 1. The network QP input of
/// each side is the larger QP of the two sources. Throws DomainError if a
/// source reconstruction is missing.
std::optional<Array> generate_pc_frame(int poc, const std::map<int, Array>& recon, const std::map<int, int>& qps,
                                       const PcGenerator& model);

/// Bits of a signed exp-Golomb code for v.
int signed_exp_golomb_bits(int v);

// ---------------------------------------------------------------------------
// CU decisions

/// One prediction choice: a list entry, whether the shared index denotes the
/// PC picture, and an integer motion vector.
struct PredictionChoice {
  int list = 0;
  int index = 0;
  bool use_pc = false;
  MotionVector mv;
  bool operator==(const PredictionChoice&) const = default;
};

struct CuDecision {
  std::size_t y = 0, x = 0, size = 0;
  PredictionChoice pred;
  /// SATD + lambda * (motion + index + flag bits) of this leaf.
  double cost = 0.0;
  bool operator==(const CuDecision&) const = default;
};

/// Candidate reference pictures of one frame.
struct ReferenceSet {
  ReferenceLists lists;
  std::map<int, const Array*> pictures;  // by POC
  const Array* pc = nullptr;             // PC picture, if available and enabled
};

/// Slot order of a SatdTable built for `refs`: the list entries as returned by
/// ReferenceLists::entries(), followed by the PC picture when present.
std::vector<const Array*> table_references(const ReferenceSet& refs);

/// Precomputed SATD of every 8x8 block of the current picture against every
/// candidate reference and integer displacement in [-range, range]^2.
class SatdTable {
 public:
  SatdTable(const Array& current, const std::vector<const Array*>& refs, int range, std::size_t threads = 1);
  /// SATD of the size x size CU at (y, x) against reference r displaced by mv.
  std::int64_t cu_satd(std::size_t r, std::size_t y, std::size_t x, std::size_t size, MotionVector mv) const;
  int range() const { return range_; }

 private:
  std::size_t blocks_h_ = 0, blocks_w_ = 0;
  int range_ = 0;
  std::size_t mvs_ = 0;
  // levels_[r][k][(mv * bh_k + by) * bw_k + bx]: level k sums 2^k x 2^k blocks.
  std::vector<std::array<std::vector<std::int32_t>, 4>> levels_;
};

struct RdoOptions {
  double lambda = 1.0;
  int search_range = 16;
  /// When false the PC picture is ignored even if provided (baseline pass).
  bool allow_pc = true;
};

struct RdoResult {
  std::vector<CuDecision> cus;  // leaves in z-order
  double cost = 0.0;            // includes split-flag bits
  std::size_t split_bits = 0;
};

/// Index signalling bits of a list entry: one list flag when both lists are
/// non-empty, plus a truncated-unary index within the list.
int index_bits(const ReferenceLists& lists, int list, int index);

/// Quadtree RDO over the whole picture (CU sizes 64..8). Leaf cost is
/// SATD + lambda * (mv bits + index bits + flag bit), where the flag bit is
/// charged only when the CU uses the shared index and a PC picture is
/// available. Split cost adds one split-flag bit per CU that fits inside the
/// picture and is larger than 8.
RdoResult cu_rdo(const Array& current, const ReferenceSet& refs, const SatdTable& table, const RdoOptions& opt);

/// The same decision for a single CU, recursing into children.
RdoResult cu_rdo_block(const Array& current, const ReferenceSet& refs, const SatdTable& table, const RdoOptions& opt,
                       std::size_t y, std::size_t x, std::size_t size);

/// Reference picture addressed by a prediction choice.
const Array& choice_picture(const ReferenceSet& refs, const PredictionChoice& c);

// ---------------------------------------------------------------------------
// Frame and sequence coding

struct FrameStats {
  int poc = 0;
  int layer = 0;
  double rate = 0.0;  // sum |levels| + mv + index + flag + split bits
  double residue_bits = 0.0;
  double side_bits = 0.0;
  double sse = 0.0;
  double psnr = 0.0;
  double rdo_cost = 0.0;
  /// RDO cost of the same picture and references with the PC picture disabled.
  double baseline_rdo_cost = 0.0;
  /// Leaf CUs of that baseline decision using the shared index.
  std::size_t baseline_shared_cus = 0;
  std::array<std::size_t, 4> cu_histogram{};  // counts of 64, 32, 16, 8
  std::size_t cus = 0;
  std::size_t pc_cus = 0;
  bool pc_available = false;
};

/// Everything a decoder needs to rebuild one picture.
struct FrameRecord {
  int poc = 0;
  int qp = 0;
  bool intra = false;
  std::vector<CuDecision> cus;
  /// Quantized levels of each 8x8 block in raster order, 64 per block.
  std::vector<std::int32_t> levels;
};

struct EncodedFrame {
  Array reconstruction;
  FrameStats stats;
  FrameRecord record;
};

/// Codes `frame` against `refs` at `qp`: RDO decisions, motion-compensated
/// prediction, residue coded by the 8x8 Hadamard quantizer, reconstruction
/// clip(round(prediction + dequantized residue)).
EncodedFrame encode_frame_sim(const Array& frame, const ReferenceSet& refs, int qp, int search_range = 16,
                              std::size_t threads = 1);

/// Codes POC 0 against a flat 128 prediction.
EncodedFrame encode_intra_frame(const Array& frame, int qp);

/// PSNR with peak 255; 100 dB when sse is 0.
double psnr_from_sse(double sse, std::size_t samples);

struct SequenceConfig {
  bool with_pc = false;
  std::vector<int> qps{27, 32, 37, 42};
  int search_range = 16;
  std::size_t threads = 1;
  std::string label;
};

struct RdPoint {
  int qp = 0;
  double rate = 0.0;
  double psnr = 0.0;
  double rdo_cost = 0.0;
  double baseline_rdo_cost = 0.0;
  std::size_t baseline_shared_cus = 0;
  std::array<std::size_t, 4> cu_histogram{};
  std::size_t inter_cus = 0;
  std::size_t pc_eligible_cus = 0;
  std::size_t pc_cus = 0;
  double lambda = 0.0;

  /// Leaf CUs of PC-eligible frames choosing the PC picture.
  double pc_ratio() const { return pc_eligible_cus ? static_cast<double>(pc_cus) / pc_eligible_cus : 0.0; }
  /// Count-weighted mean side length of the leaf CUs of inter pictures.
  double mean_cu_size() const;
};

struct SequenceRun {
  std::vector<RdPoint> points;  // one per QP, in config order
  std::vector<std::vector<FrameStats>> frames;
  std::vector<std::vector<FrameRecord>> records;
  std::vector<std::vector<Array>> reconstructions;  // by POC
};

/// Codes the first 1 + 16k frames at every QP. Throws DomainError with fewer
/// than 17 frames, or when with_pc is set without a generator.
SequenceRun run_sequence(const std::vector<Array>& frames, const SequenceConfig& cfg,
                         const PcGenerator& model = {});

/// Rebuilds reconstructions from records alone (coding order as produced by
/// run_sequence for one QP).
std::vector<Array> decode_sequence(const std::vector<FrameRecord>& records, std::size_t height, std::size_t width,
                                   bool with_pc, const PcGenerator& model = {});

// ---------------------------------------------------------------------------
// BD-rate

struct RatePoint {
  double rate = 0.0;
  double psnr = 0.0;
};

using BdCurve = std::vector<RatePoint>;

BdCurve curve_of(const SequenceRun& run);

/// Average rate difference of `test` relative to `anchor` at equal PSNR, in
/// percent. Each curve is fitted by a least-squares cubic of log10(rate) in
/// PSNR; the fits are integrated over the common PSNR interval. Throws
/// DomainError with fewer than 4 points, non-positive rates, a degenerate fit
/// or disjoint PSNR ranges.
double bd_rate(const BdCurve& anchor, const BdCurve& test);

}  // namespace fkinterp
