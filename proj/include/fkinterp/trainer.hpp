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

// Training data generation and the training loop.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fkinterp/array.hpp"
#include "fkinterp/checkpoint.hpp"
#include "fkinterp/error.hpp"
#include "fkinterp/interp_net.hpp"
#include "fkinterp/losses.hpp"
#include "fkinterp/optimizer.hpp"
#include "fkinterp/parallel.hpp"
#include "fkinterp/transform_quant.hpp"

namespace fkinterp {

// ---------------------------------------------------------------------------
// Synthetic clips

enum class MotionKind { kTranslate, kRotate, kZoom, kDeform };

std::string_view to_string(MotionKind kind);
MotionKind parse_motion_kind(std::string_view name);

/// Motion between the left (t = 0) and right (t = 1) frame. Each frame at
/// time t samples the texture through the warp scaled by t, so the middle
/// frame is the exact temporal midpoint.
struct MotionParams {
  MotionKind kind = MotionKind::kTranslate;
  double dx = 0.0, dy = 0.0;      // translate: total displacement in pixels
  double angle_deg = 0.0;         // rotate: total angle about the frame center
  double zoom = 1.0;              // zoom: total scale factor about the center
  double amplitude = 0.0;         // deform: peak displacement in pixels
  double wavelength = 48.0;       // deform: spatial period in pixels
  double phase_x = 0.0, phase_y = 0.0;

  /// Random parameters of the given kind, moderate enough for the toy kernels.
  static MotionParams random(MotionKind kind, std::uint64_t seed);
};

/// Smooth procedural texture (oriented gratings plus soft-edged discs) that
/// can be sampled at any real coordinate; values roughly in [16, 240].
class ProceduralTexture {
 public:
  explicit ProceduralTexture(std::uint64_t seed);
  double operator()(double y, double x) const;

 private:
  struct Grating {
    double ky, kx, phase, amp;
  };
  struct Disc {
    double cy, cx, radius, amp;
  };
  double base_ = 128.0;
  std::vector<Grating> gratings_;
  std::vector<Disc> discs_;
};

struct Clip {
  Array left, mid, right;  // [1,H,W], integer sample values
  MotionParams motion;
  std::uint64_t seed = 0;
  std::string source;  // "synthetic" or a file path
};

/// Frame at time t in [0, 1] of `texture` under `motion`, rounded to integers.
Array render_frame(const ProceduralTexture& texture, const MotionParams& motion, double t, std::size_t height,
                   std::size_t width);

Clip synthesize_clip(std::uint64_t seed, MotionKind kind, std::size_t size);
Clip synthesize_clip(std::uint64_t seed, const MotionParams& motion, std::size_t height, std::size_t width);
/// Frame i renders the texture at t = i, so `motion` is the per-frame motion.
std::vector<Array> synthesize_sequence(std::uint64_t seed, const MotionParams& motion, std::size_t frames,
                                       std::size_t height, std::size_t width);

/// Consecutive frame triples (i, i+1, i+2) of a luma sequence.
std::vector<Clip> clips_from_frames(const std::vector<Array>& frames, const std::string& source);

// ---------------------------------------------------------------------------
// Samples

struct ClipSample {
  Array left, right;  // degraded references
  Array target;       // clean middle frame
  int qp_left = 0, qp_right = 0;
  std::size_t crop_y = 0, crop_x = 0;
  std::size_t clip_index = 0;
  std::uint64_t clip_seed = 0;
  std::string source;
};

struct DatasetConfig {
  std::size_t count = 64;
  std::size_t crop = 150;
  /// Crops whose mean block displacement exceeds this many pixels are rejected.
  double flow_threshold = 16.0;
  std::size_t flow_block = 16;
  int max_qp_diff = 10;
  std::uint64_t seed = 1;
  /// Give up after count * attempts_per_sample draws.
  std::size_t attempts_per_sample = 50;
};

struct Dataset {
  std::vector<ClipSample> samples;
  std::size_t rejected = 0;
};

/// QP_l uniform in [0, 51], QP_r = clamp(QP_l + uniform(-d, d), 0, 51).
std::pair<int, int> draw_qp_pair(std::uint64_t seed, int max_diff);

Dataset build_training_set(const std::vector<Clip>& clips, const DatasetConfig& cfg);

/// Writes id, source, clip_seed, crop_y, crop_x, qp_left, qp_right.
void write_dataset_manifest(const std::filesystem::path& path, const Dataset& ds);

struct AugmentFlags {
  std::size_t crop_y = 0, crop_x = 0;
  bool swapped = false;
  bool flip_h = false;
  bool flip_v = false;
};

struct TrainingInstance {
  Array left, right, target;
  int qp_left = 0, qp_right = 0;
  AugmentFlags flags;
};

/// Applies explicit augmentation flags to a sample.
TrainingInstance apply_augmentation(const ClipSample& s, const AugmentFlags& flags, std::size_t crop);
/// Random crop, swap with probability 1/2, independent flips with probability 1/2.
TrainingInstance augment(const ClipSample& s, std::uint64_t seed, std::size_t crop = 128);
/// Deterministic centered crop, no swap or flips; used for validation.
TrainingInstance center_instance(const ClipSample& s, std::size_t crop = 128);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t epochs = 70;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::size_t lr_decay_epoch = 30;
  double lr_decay_factor = 0.1;
  std::size_t crop = 128;
  LossConfig loss;
  AdamaxConfig adamax;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::optional<std::filesystem::path> checkpoint_path;
  std::optional<std::filesystem::path> trace_path;

  double lr_at(std::size_t epoch) const { return epoch < lr_decay_epoch ? lr : lr * lr_decay_factor; }
};

struct TraceRow {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/// Raised when a loss or gradient becomes non-finite. The last good state was
/// checkpointed (when a checkpoint path is configured) before throwing.
class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  std::uint64_t step = 0;
  AdamaxState optimizer;
};

/// Mean multiscale loss over centered validation crops.
double evaluate(const InterpNet& net, const std::vector<ClipSample>& samples, const LossConfig& loss,
                std::size_t crop = 128, std::size_t threads = 1);

/// Loss and parameter gradients of one instance.
std::pair<double, std::vector<Array>> instance_gradient(const InterpNet& net, const TrainingInstance& inst,
                                                        const LossConfig& loss);

/// Trains `net` in place. When `resume` is given its step counter and
/// optimizer state are continued; the epoch resumes at step / steps_per_epoch.
TrainResult train(InterpNet& net, const std::vector<ClipSample>& train_set, const std::vector<ClipSample>& val_set,
                  const TrainConfig& cfg, const std::optional<Checkpoint>& resume = std::nullopt,
                  const std::function<void(const TraceRow&)>& on_epoch = {});

void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& rows);
std::vector<TraceRow> read_trace(const std::filesystem::path& path);

}  // namespace fkinterp
