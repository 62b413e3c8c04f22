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

#include "fkinterp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "fkinterp/motion.hpp"
#include "fkinterp/ops.hpp"
#include "fkinterp/seed.hpp"
#include "fkinterp/video_io.hpp"

namespace fkinterp {
namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Array crop_plane(const Array& a, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  return ops::crop(a, {y, a.dim(1) - y - h, x, a.dim(2) - x - w});
}

Array flip(const Array& a, bool horizontal) {
  Array out = Array::like(a);
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        out.at(k, y, x) = horizontal ? a.at(k, y, w - 1 - x) : a.at(k, h - 1 - y, x);
      }
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::kTranslate: return "translate";
    case MotionKind::kRotate: return "rotate";
    case MotionKind::kZoom: return "zoom";
    case MotionKind::kDeform: return "deform";
  }
  return "?";
}

MotionKind parse_motion_kind(std::string_view name) {
  for (MotionKind k : {MotionKind::kTranslate, MotionKind::kRotate, MotionKind::kZoom, MotionKind::kDeform}) {
    if (to_string(k) == name) return k;
  }
  throw DomainError("unknown motion kind '" + std::string(name) + "'");
}

MotionParams MotionParams::random(MotionKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {0x6d6f74}));
  MotionParams m;
  m.kind = kind;
  const double sgn = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
  switch (kind) {
    case MotionKind::kTranslate:
      m.dx = uniform(rng, -8.0, 8.0);
      m.dy = uniform(rng, -8.0, 8.0);
      break;
    case MotionKind::kRotate:
      m.angle_deg = sgn * uniform(rng, 1.0, 6.0);
      break;
    case MotionKind::kZoom:
      m.zoom = std::exp(sgn * uniform(rng, 0.02, 0.08));
      break;
    case MotionKind::kDeform:
      m.amplitude = uniform(rng, 2.0, 5.0);
      m.wavelength = uniform(rng, 40.0, 80.0);
      m.phase_x = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      m.phase_y = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      break;
  }
  return m;
}

ProceduralTexture::ProceduralTexture(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {0x746578}));
  base_ = uniform(rng, 96.0, 160.0);
  const int ng = uniform_int(rng, 3, 6);
  for (int i = 0; i < ng; ++i) {
    const double period = uniform(rng, 8.0, 48.0);
    const double theta = uniform(rng, 0.0, std::numbers::pi);
    const double k = 2.0 * std::numbers::pi / period;
    gratings_.push_back({k * std::sin(theta), k * std::cos(theta), uniform(rng, 0.0, 2.0 * std::numbers::pi),
                         uniform(rng, 6.0, 22.0)});
  }
  const int nd = uniform_int(rng, 8, 20);
  for (int i = 0; i < nd; ++i) {
    discs_.push_back({uniform(rng, -64.0, 320.0), uniform(rng, -64.0, 320.0), uniform(rng, 5.0, 36.0),
                      uniform(rng, -50.0, 50.0)});
  }
}

double ProceduralTexture::operator()(double y, double x) const {
  double v = base_;
  for (const Grating& g : gratings_) v += g.amp * std::sin(g.ky * y + g.kx * x + g.phase);
  for (const Disc& d : discs_) {
    const double r = std::hypot(y - d.cy, x - d.cx);
    v += d.amp / (1.0 + std::exp((r - d.radius) / 0.8));
  }
  return std::clamp(v, 16.0, 240.0);
}

Array render_frame(const ProceduralTexture& texture, const MotionParams& m, double t, std::size_t height,
                   std::size_t width) {
  Array out({1, height, width});
  const double cy = (static_cast<double>(height) - 1.0) / 2.0, cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double a = -t * m.angle_deg * std::numbers::pi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double inv_zoom = std::pow(m.zoom, -t);
  const double k = 2.0 * std::numbers::pi / m.wavelength;
  for (std::size_t yi = 0; yi < height; ++yi) {
    for (std::size_t xi = 0; xi < width; ++xi) {
      const double y = static_cast<double>(yi), x = static_cast<double>(xi);
      double qy = y, qx = x;
      switch (m.kind) {
        case MotionKind::kTranslate:
          qy = y - t * m.dy;
          qx = x - t * m.dx;
          break;
        case MotionKind::kRotate:
          qy = cy + sa * (x - cx) + ca * (y - cy);
          qx = cx + ca * (x - cx) - sa * (y - cy);
          break;
        case MotionKind::kZoom:
          qy = cy + (y - cy) * inv_zoom;
          qx = cx + (x - cx) * inv_zoom;
          break;
        case MotionKind::kDeform:
          qy = y - t * m.amplitude * std::sin(k * x + m.phase_y);
          qx = x - t * m.amplitude * std::sin(k * y + m.phase_x);
          break;
      }
      out.at(0, yi, xi) = std::round(texture(qy, qx));
    }
  }
  return out;
}

Clip synthesize_clip(std::uint64_t seed, const MotionParams& motion, std::size_t height, std::size_t width) {
  const ProceduralTexture tex(seed);
  Clip c;
  c.left = render_frame(tex, motion, 0.0, height, width);
  c.mid = render_frame(tex, motion, 0.5, height, width);
  c.right = render_frame(tex, motion, 1.0, height, width);
  c.motion = motion;
  c.seed = seed;
  c.source = "synthetic";
  return c;
}

Clip synthesize_clip(std::uint64_t seed, MotionKind kind, std::size_t size) {
  return synthesize_clip(seed, MotionParams::random(kind, seed), size, size);
}

std::vector<Array> synthesize_sequence(std::uint64_t seed, const MotionParams& motion, std::size_t frames,
                                       std::size_t height, std::size_t width) {
  const ProceduralTexture tex(seed);
  std::vector<Array> out;
  out.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) out.push_back(render_frame(tex, motion, static_cast<double>(i), height, width));
  return out;
}

std::vector<Clip> clips_from_frames(const std::vector<Array>& frames, const std::string& source) {
  std::vector<Clip> clips;
  for (std::size_t i = 0; i + 2 < frames.size(); ++i) {
    Clip c;
    c.left = frames[i];
    c.mid = frames[i + 1];
    c.right = frames[i + 2];
    c.seed = i;
    c.source = source;
    clips.push_back(std::move(c));
  }
  return clips;
}

// ---------------------------------------------------------------------------

std::pair<int, int> draw_qp_pair(std::uint64_t seed, int max_diff) {
  std::mt19937_64 rng(derive_seed(seed, {0x7170}));
  const int l = uniform_int(rng, 0, kMaxQp);
  const int r = std::clamp(l + uniform_int(rng, -max_diff, max_diff), 0, kMaxQp);
  return {l, r};
}

Dataset build_training_set(const std::vector<Clip>& clips, const DatasetConfig& cfg) {
  if (clips.empty()) throw DomainError("build_training_set: no clips");
  if (cfg.max_qp_diff < 0 || cfg.max_qp_diff > 10) throw DomainError("build_training_set: QP difference must be 0..10");
  for (const Clip& c : clips) {
    if (c.left.dim(1) < cfg.crop || c.left.dim(2) < cfg.crop) {
      throw DomainError("build_training_set: clip " + shape_to_string(c.left.shape()) + " smaller than the " +
                        std::to_string(cfg.crop) + " crop");
    }
  }
  const int range = static_cast<int>(std::ceil(2.0 * cfg.flow_threshold));
  Dataset ds;
  const std::size_t max_attempts = cfg.count * cfg.attempts_per_sample;
  for (std::size_t attempt = 0; ds.samples.size() < cfg.count; ++attempt) {
    if (attempt >= max_attempts) {
      throw DomainError("build_training_set: only " + std::to_string(ds.samples.size()) + " of " +
                        std::to_string(cfg.count) + " crops passed the motion filter after " +
                        std::to_string(attempt) + " attempts");
    }
    std::mt19937_64 rng(derive_seed(cfg.seed, {attempt}));
    const std::size_t ci = attempt % clips.size();
    const Clip& clip = clips[ci];
    const std::size_t oy = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(clip.left.dim(1) - cfg.crop)));
    const std::size_t ox = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(clip.left.dim(2) - cfg.crop)));
    const Array l = crop_plane(clip.left, oy, ox, cfg.crop, cfg.crop);
    const Array r = crop_plane(clip.right, oy, ox, cfg.crop, cfg.crop);
    if (mean_block_displacement(l, r, cfg.flow_block, range) > cfg.flow_threshold) {
      ++ds.rejected;
      continue;
    }
    ClipSample s;
    std::tie(s.qp_left, s.qp_right) = draw_qp_pair(derive_seed(cfg.seed, {attempt, 1}), cfg.max_qp_diff);
    s.left = degrade_compress_proxy(l, s.qp_left);
    s.right = degrade_compress_proxy(r, s.qp_right);
    s.target = crop_plane(clip.mid, oy, ox, cfg.crop, cfg.crop);
    s.crop_y = oy;
    s.crop_x = ox;
    s.clip_index = ci;
    s.clip_seed = clip.seed;
    s.source = clip.source;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void write_dataset_manifest(const std::filesystem::path& path, const Dataset& ds) {
  CsvWriter csv(path, {"id", "source", "clip_seed", "crop_y", "crop_x", "qp_left", "qp_right"});
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const ClipSample& s = ds.samples[i];
    csv.cell(i).cell(s.source).cell(static_cast<long long>(s.clip_seed)).cell(s.crop_y).cell(s.crop_x);
    csv.cell(s.qp_left).cell(s.qp_right);
    csv.end_row();
  }
  csv.close();
}

TrainingInstance apply_augmentation(const ClipSample& s, const AugmentFlags& f, std::size_t crop) {
  const std::size_t h = s.target.dim(1), w = s.target.dim(2);
  if (crop > h || crop > w || f.crop_y + crop > h || f.crop_x + crop > w) {
    throw DomainError("augment: crop does not fit inside the sample");
  }
  TrainingInstance t;
  t.flags = f;
  t.left = crop_plane(f.swapped ? s.right : s.left, f.crop_y, f.crop_x, crop, crop);
  t.right = crop_plane(f.swapped ? s.left : s.right, f.crop_y, f.crop_x, crop, crop);
  t.target = crop_plane(s.target, f.crop_y, f.crop_x, crop, crop);
  t.qp_left = f.swapped ? s.qp_right : s.qp_left;
  t.qp_right = f.swapped ? s.qp_left : s.qp_right;
  for (Array* a : {&t.left, &t.right, &t.target}) {
    if (f.flip_h) *a = flip(*a, true);
    if (f.flip_v) *a = flip(*a, false);
  }
  return t;
}

TrainingInstance augment(const ClipSample& s, std::uint64_t seed, std::size_t crop) {
  std::mt19937_64 rng(derive_seed(seed, {0x617567}));
  AugmentFlags f;
  if (crop > s.target.dim(1) || crop > s.target.dim(2)) throw DomainError("augment: crop larger than the sample");
  f.crop_y = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(s.target.dim(1) - crop)));
  f.crop_x = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(s.target.dim(2) - crop)));
  std::bernoulli_distribution coin(0.5);
  f.swapped = coin(rng);
  f.flip_h = coin(rng);
  f.flip_v = coin(rng);
  return apply_augmentation(s, f, crop);
}

TrainingInstance center_instance(const ClipSample& s, std::size_t crop) {
  AugmentFlags f;
  if (crop > s.target.dim(1) || crop > s.target.dim(2)) throw DomainError("center_instance: crop larger than sample");
  f.crop_y = (s.target.dim(1) - crop) / 2;
  f.crop_x = (s.target.dim(2) - crop) / 2;
  return apply_augmentation(s, f, crop);
}

// ---------------------------------------------------------------------------

namespace {

void require_trainable_size(const InterpNet& net, const Array& a) {
  const std::size_t m = net.config().pad_multiple();
  if (a.dim(1) % m != 0 || a.dim(2) % m != 0) {
    throw ShapeError("training crops must be multiples of " + std::to_string(m) + ", got " +
                     shape_to_string(a.shape()));
  }
}

}  // namespace

std::pair<double, std::vector<Array>> instance_gradient(const InterpNet& net, const TrainingInstance& inst,
                                                        const LossConfig& loss) {
  require_trainable_size(net, inst.target);
  Tape tape;
  const NetForward fw = net.record(tape, inst.left, inst.right, inst.qp_left, inst.qp_right);
  const VarId l = record_multiscale_loss(tape, fw.pyramid, inst.target, loss);
  tape.backward(l);
  std::vector<Array> grads;
  grads.reserve(fw.params.size());
  for (VarId p : fw.params) grads.push_back(tape.grad(p));
  return {tape.value(l)[0], std::move(grads)};
}

double evaluate(const InterpNet& net, const std::vector<ClipSample>& samples, const LossConfig& loss, std::size_t crop,
                std::size_t threads) {
  if (samples.empty()) return 0.0;
  std::vector<double> values(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const TrainingInstance inst = center_instance(samples[i], crop);
    require_trainable_size(net, inst.target);
    Tape tape;
    const NetForward fw = net.record(tape, inst.left, inst.right, inst.qp_left, inst.qp_right);
    ScalePyramid p;
    for (std::size_t s = 0; s < 3; ++s) p.at(s) = tape.value(fw.pyramid.levels[s]);
    values[i] = multiscale_loss(p, inst.target, loss);
  });
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& rows) {
  CsvWriter csv(path, {"epoch", "lr", "train_loss", "val_loss"});
  for (const TraceRow& r : rows) {
    csv.cell(r.epoch).cell(r.lr).cell(r.train_loss).cell(r.val_loss);
    csv.end_row();
  }
  csv.close();
}

std::vector<TraceRow> read_trace(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  std::vector<TraceRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4) throw FormatError(path.string() + ": trace row with wrong column count");
    try {
      out.push_back({std::stoul(rows[i][0]), std::stod(rows[i][1]), std::stod(rows[i][2]), std::stod(rows[i][3])});
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": malformed trace row " + std::to_string(i));
    }
  }
  return out;
}

TrainResult train(InterpNet& net, const std::vector<ClipSample>& train_set, const std::vector<ClipSample>& val_set,
                  const TrainConfig& cfg, const std::optional<Checkpoint>& resume,
                  const std::function<void(const TraceRow&)>& on_epoch) {
  if (train_set.empty()) throw DomainError("train: empty training set");
  if (cfg.batch_size == 0) throw DomainError("train: batch size must be positive");
  const std::size_t n = train_set.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;

  TrainResult result;
  result.optimizer = AdamaxState::zeros_like(net.parameters());
  if (resume) {
    if (!(resume->config == net.config())) {
      throw CheckpointError(CheckpointError::Kind::kConfigMismatch, "train: resume checkpoint configuration differs");
    }
    net = InterpNet(resume->config, resume->weights);
    result.step = resume->step;
    if (resume->optimizer) result.optimizer = *resume->optimizer;
  }
  const std::size_t start_epoch = static_cast<std::size_t>(result.step / steps_per_epoch);
  if (resume && cfg.trace_path && std::filesystem::exists(*cfg.trace_path)) {
    for (const TraceRow& r : read_trace(*cfg.trace_path)) {
      if (r.epoch < start_epoch) result.trace.push_back(r);
    }
  }

  const auto save = [&](const std::filesystem::path& path) {
    Checkpoint ck{net.config(), net.parameters(), result.step, result.optimizer};
    save_checkpoint(ck, path);
  };

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, {epoch, 0x73687566}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t begin = b * cfg.batch_size, end = std::min(n, begin + cfg.batch_size);
      const std::size_t count = end - begin;
      std::vector<double> losses(count);
      std::vector<std::vector<Array>> grads(count);
      try {
        parallel_for(count, cfg.threads, [&](std::size_t i) {
          const std::size_t idx = order[begin + i];
          const TrainingInstance inst = augment(train_set[idx], derive_seed(cfg.seed, {epoch, idx}), cfg.crop);
          std::tie(losses[i], grads[i]) = instance_gradient(net, inst, cfg.loss);
        });
      } catch (const NumericError& e) {
        if (cfg.checkpoint_path) save(*cfg.checkpoint_path);
        throw DivergenceError(std::string("training diverged at step ") + std::to_string(result.step) + ": " +
                              e.what());
      }
      // Fixed-order reduction keeps the update independent of the thread count.
      std::vector<Array> mean = std::move(grads[0]);
      for (std::size_t i = 1; i < count; ++i) {
        for (std::size_t p = 0; p < mean.size(); ++p) mean[p] += grads[i][p];
      }
      for (Array& g : mean) g *= 1.0 / static_cast<double>(count);
      double batch_loss = 0.0;
      for (double l : losses) batch_loss += l;
      if (!std::isfinite(batch_loss)) {
        if (cfg.checkpoint_path) save(*cfg.checkpoint_path);
        throw DivergenceError("training diverged at step " + std::to_string(result.step) + ": non-finite loss");
      }
      epoch_loss += batch_loss;
      adamax_step(net.parameters(), mean, result.optimizer, lr, cfg.adamax);
      ++result.step;
    }
    TraceRow row{epoch, lr, epoch_loss / static_cast<double>(n), evaluate(net, val_set, cfg.loss, cfg.crop, cfg.threads)};
    if (!std::isfinite(row.val_loss)) throw DivergenceError("validation loss is not finite after epoch " + std::to_string(epoch));
    result.trace.push_back(row);
    if (cfg.checkpoint_path) save(*cfg.checkpoint_path);
    if (cfg.trace_path) write_trace(*cfg.trace_path, result.trace);
    if (on_epoch) on_epoch(row);
  }
  return result;
}

}  // namespace fkinterp
