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

// Multi-scale quality-attentive factorized-kernel interpolation network.
//
//   refs/255 --> encoder (2 convs per level, avg-pool between levels)
//            --> decoder (bilinear up, concat skip, 2 convs) --> features at 1/4, 1/2, 1
//   per scale s: four kernel heads (Kv_l, Kh_l, Kv_r, Kh_r), each 4 convs -> rank*n(s) channels
//                one quality head on [features, QP_l/51, QP_r/51], 4 convs -> 2 channels
//   synthesis:   I^s = sum_t Q^s_t (Kv' * Kh . P^s_t) + up2(I^{s/2})
//
// Frames are luma planes in 8-bit sample units ([1,H,W], values 0..255).

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fkinterp/adaptive_conv.hpp"
#include "fkinterp/array.hpp"
#include "fkinterp/tape.hpp"

namespace fkinterp {

inline constexpr int kMaxQp = 51;

struct NetConfig {
  /// Number of 2x downsamplings in the encoder; coarsest features at 1/2^depth.
  std::size_t depth = 4;
  /// Channels per encoder/decoder level, depth + 1 entries.
  std::vector<std::size_t> widths{16, 32, 64, 128, 256};
  /// 1-D kernel length at scales 1/4, 1/2, 1.
  std::array<std::size_t, 3> kernel_lengths{13, 25, 51};
  /// Rank of the factorized kernels produced per scale.
  std::size_t rank = 1;
  /// Hidden channels of every head layer.
  std::size_t head_width = 32;
  /// Convolution layers per head.
  std::size_t head_depth = 4;
  /// Number of reference frames.
  std::size_t references = 2;

  static NetConfig defaults() { return {}; }
  /// Small network used for desk-scale training runs.
  static NetConfig toy();
  /// Two-level network small enough for exhaustive finite differences.
  static NetConfig tiny();

  void validate() const;
  std::size_t pad_multiple() const { return std::size_t{1} << depth; }
  std::string to_json() const;
  static NetConfig from_json(const std::string& text);

  bool operator==(const NetConfig&) const = default;
};

/// Constant normalized QP map, value qp/51. Throws DomainError outside [0,51].
Array qp_map(int qp, std::size_t height, std::size_t width);
double normalize_qp(int qp);

struct NamedArray {
  std::string name;
  Array value;
  bool operator==(const NamedArray&) const = default;
};

/// Ordered, named weights of a network.
class Parameters {
 public:
  void add(std::string name, Array value);
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const Array& operator[](std::size_t i) const { return entries_.at(i).value; }
  Array& operator[](std::size_t i) { return entries_.at(i).value; }
  const std::string& name(std::size_t i) const { return entries_.at(i).name; }
  const Array& get(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  const std::vector<NamedArray>& entries() const { return entries_; }
  std::vector<NamedArray>& entries() { return entries_; }

  bool operator==(const Parameters&) const = default;

 private:
  std::vector<NamedArray> entries_;
};

/// Decoder feature maps at scales {1/4, 1/2, 1}.
struct FeaturePyramid {
  std::array<VarId, 3> levels{};
};

/// Handles of one recorded forward pass.
struct NetForward {
  std::vector<VarId> params;
  VarId refs = 0;
  FeaturePyramid features;
  std::array<TapeScaleFields, 3> fields;
  TapePyramid pyramid;
};

struct Interpolation {
  /// Synthesized frames cropped to the input size (scale s: ceil(H*s) x ceil(W*s)).
  ScalePyramid pyramid;
  /// Per-reference share of the full-resolution frame, [c,H,W].
  Array contributions;
  /// contributions divided by the synthesized frame, [c,H,W].
  Array weights;
  /// Kernels and gates as predicted on the padded frame.
  std::array<ScaleFields, 3> fields;
};

class InterpNet {
 public:
  /// Freshly initialized network (see initialize()).
  InterpNet(NetConfig config, std::uint64_t seed);
  InterpNet(NetConfig config, Parameters params);

  const NetConfig& config() const { return config_; }
  const Parameters& parameters() const { return params_; }
  Parameters& parameters() { return params_; }

  /// Records the full forward pass for references already padded to a
  /// multiple of 2^depth. `left`, `right` are [1,H,W].
  NetForward record(Tape& tape, const Array& left, const Array& right, int qp_left, int qp_right) const;

  /// Encoder-decoder only.
  FeaturePyramid extract_features(Tape& tape, const std::vector<VarId>& params, VarId refs) const;
  /// Kernel heads of every scale.
  std::array<TapeKernelField, 3> estimate_kernel_heads(Tape& tape, const std::vector<VarId>& params,
                                                       const FeaturePyramid& features) const;
  /// Quality heads of every scale.
  std::array<VarId, 3> estimate_quality_maps(Tape& tape, const std::vector<VarId>& params,
                                             const FeaturePyramid& features, int qp_left, int qp_right) const;

  /// Pads, runs the network, and crops back to the input size.
  Interpolation interpolate(const Array& left, const Array& right, int qp_left, int qp_right) const;

 private:
  void build_layout();
  void initialize(std::uint64_t seed);
  VarId conv(Tape& tape, const std::vector<VarId>& params, const std::string& prefix, VarId x) const;

  NetConfig config_;
  Parameters params_;
};

/// Replicate-pads a [C,H,W] array on the bottom/right to a multiple of `multiple`.
Array pad_to_multiple(const Array& a, std::size_t multiple);

/// Average of the two references at every synthesis scale.
ScalePyramid average_baseline(const Array& left, const Array& right);

}  // namespace fkinterp
