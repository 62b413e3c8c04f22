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

// fkinterp command-line tool.
//
// Exit codes: 0 success, 1 internal error, 2 usage or invalid arguments,
// 3 I/O, format or checkpoint errors, 4 numeric divergence, 5 failed
// verification.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fkinterp/checkpoint.hpp"
#include "fkinterp/codec_sim.hpp"
#include "fkinterp/error.hpp"
#include "fkinterp/interp_net.hpp"
#include "fkinterp/seed.hpp"
#include "fkinterp/trainer.hpp"
#include "fkinterp/verify.hpp"
#include "fkinterp/video_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace fkinterp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitVerify = 5;

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Options shared by every subcommand.

struct Common {
  std::optional<std::uint64_t> seed_flag;
  std::uint64_t seed = 1;
  std::string seed_source = "default";
  std::size_t threads = 1;
  std::optional<fs::path> manifest;
};

void resolve_seed(Common& c) {
  if (c.seed_flag) {
    c.seed = *c.seed_flag;
    c.seed_source = "flag";
    return;
  }
  if (const char* env = std::getenv("FKINTERP_SEED"); env && *env) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(env, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != std::string(env).size()) throw DomainError(std::string("FKINTERP_SEED is not an integer: ") + env);
    c.seed = v;
    c.seed_source = "FKINTERP_SEED";
  }
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed_flag, "Random seed (falls back to FKINTERP_SEED, then 1)");
  app->add_option("--threads", c.threads, "Maximum worker threads")->check(CLI::PositiveNumber);
  app->add_option("--manifest", c.manifest, "Where to write the run manifest (JSON)");
}

json common_json(const std::string& cmd, const Common& c) {
  json j;
  j["tool"] = "fkinterp";
  j["version"] = kVersion;
  j["subcommand"] = cmd;
  j["seed"] = c.seed;
  j["seed_source"] = c.seed_source;
  j["threads"] = c.threads;
  return j;
}

void write_manifest(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

// ---------------------------------------------------------------------------
// Frame and video input.

struct RawFormat {
  std::size_t width = 0, height = 0;
  std::string format = "yuv420p";
};

std::vector<Array> read_video_luma(const fs::path& path, const RawFormat& raw) {
  const std::string ext = path.extension().string();
  std::vector<YuvFrame> frames;
  if (ext == ".y4m") {
    frames = read_y4m(path).frames;
  } else if (ext == ".yuv") {
    if (raw.width == 0 || raw.height == 0) throw DomainError("raw YUV input requires --width and --height");
    if (raw.format != "yuv420p") throw DomainError("unsupported raw format '" + raw.format + "' (only yuv420p)");
    frames = read_yuv420(path, raw.width, raw.height);
  } else if (ext == ".pgm") {
    return {read_pgm(path)};
  } else {
    throw FormatError("unrecognized input extension '" + ext + "' for " + path.string() +
                      " (expected .y4m, .yuv or .pgm)");
  }
  std::vector<Array> out;
  out.reserve(frames.size());
  for (const YuvFrame& f : frames) out.push_back(f.luma());
  return out;
}

Array read_frame(const fs::path& path, std::size_t index, const RawFormat& raw) {
  std::vector<Array> frames = read_video_luma(path, raw);
  if (index >= frames.size()) {
    throw DomainError(path.string() + " has " + std::to_string(frames.size()) + " frame(s); index " +
                      std::to_string(index) + " requested");
  }
  return std::move(frames[index]);
}

void write_frame(const fs::path& path, const Array& plane) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm") {
    write_pgm(path, plane);
  } else if (ext == ".y4m") {
    write_y4m(path, std::vector<YuvFrame>{YuvFrame::from_luma(plane)});
  } else if (ext == ".yuv") {
    write_yuv420(path, {YuvFrame::from_luma(plane)});
  } else {
    throw FormatError("unrecognized output extension '" + ext + "' (expected .pgm, .y4m or .yuv)");
  }
}

void add_raw_options(CLI::App* app, RawFormat& raw) {
  app->add_option("--width", raw.width, "Width of raw .yuv input");
  app->add_option("--height", raw.height, "Height of raw .yuv input");
  app->add_option("--format", raw.format, "Pixel format of raw .yuv input")->check(CLI::IsMember({"yuv420p"}));
}

json raw_json(const RawFormat& raw) { return {{"width", raw.width}, {"height", raw.height}, {"format", raw.format}}; }

// ---------------------------------------------------------------------------
// Dataset directories: dataset.csv plus three PGM planes per sample.

fs::path sample_plane(const fs::path& dir, std::size_t i, const char* which) {
  std::ostringstream name;
  name << std::setw(5) << std::setfill('0') << i << '_' << which << ".pgm";
  return dir / "samples" / name.str();
}

void save_dataset(const fs::path& dir, const Dataset& ds) {
  ensure_dir(dir / "samples");
  write_dataset_manifest(dir / "dataset.csv", ds);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    write_pgm(sample_plane(dir, i, "left"), ds.samples[i].left);
    write_pgm(sample_plane(dir, i, "right"), ds.samples[i].right);
    write_pgm(sample_plane(dir, i, "target"), ds.samples[i].target);
  }
}

std::vector<ClipSample> load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory " + dir.string() + " does not exist");
  const auto rows = read_csv(dir / "dataset.csv");
  if (rows.empty()) throw FormatError(dir.string() + "/dataset.csv is empty");
  const auto& header = rows[0];
  const auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw FormatError("dataset.csv lacks column '" + name + "'");
  };
  const std::size_t id = col("id"), src = col("source"), seed = col("clip_seed"), cy = col("crop_y"),
                    cx = col("crop_x"), ql = col("qp_left"), qr = col("qp_right");
  std::vector<ClipSample> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) throw FormatError("dataset.csv row " + std::to_string(r) + " is malformed");
    ClipSample s;
    const std::size_t i = std::stoul(row[id]);
    s.left = read_pgm(sample_plane(dir, i, "left"));
    s.right = read_pgm(sample_plane(dir, i, "right"));
    s.target = read_pgm(sample_plane(dir, i, "target"));
    s.source = row[src];
    s.clip_seed = std::stoull(row[seed]);
    s.crop_y = std::stoul(row[cy]);
    s.crop_x = std::stoul(row[cx]);
    s.qp_left = std::stoi(row[ql]);
    s.qp_right = std::stoi(row[qr]);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Network configuration.

struct NetChoice {
  std::string preset = "toy";
  std::optional<fs::path> json_path;
  std::optional<std::size_t> rank;
};

NetConfig resolve_net(const NetChoice& c) {
  NetConfig cfg;
  if (c.json_path) {
    std::ifstream in(*c.json_path);
    if (!in) throw IoError("cannot read network config " + c.json_path->string());
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = NetConfig::from_json(ss.str());
  } else if (c.preset == "toy") {
    cfg = NetConfig::toy();
  } else if (c.preset == "tiny") {
    cfg = NetConfig::tiny();
  } else {
    cfg = NetConfig::defaults();
  }
  if (c.rank) cfg.rank = *c.rank;
  cfg.validate();
  return cfg;
}

void add_net_options(CLI::App* app, NetChoice& c) {
  app->add_option("--config", c.preset, "Network preset")->check(CLI::IsMember({"toy", "tiny", "default"}));
  app->add_option("--config-json", c.json_path, "Network configuration JSON (overrides --config)");
  app->add_option("--rank", c.rank, "Override the kernel rank");
}

// ---------------------------------------------------------------------------
// dataset

struct DatasetArgs {
  Common common;
  bool synthetic = false;
  std::optional<fs::path> from;
  std::size_t count = 64;
  std::size_t crop = 150;
  std::size_t clip_size = 192;
  std::size_t clips = 0;
  std::vector<std::string> motions{"rotate", "deform"};
  double flow_threshold = 16.0;
  int max_qp_diff = 10;
  RawFormat raw;
  fs::path out;
};

int cmd_dataset(DatasetArgs& a) {
  resolve_seed(a.common);
  std::vector<Clip> clips;
  json inputs = json::array();
  if (a.from) {
    if (!fs::is_directory(*a.from)) throw IoError("input directory " + a.from->string() + " does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(*a.from)) {
      const std::string ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".y4m" || ext == ".yuv")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .y4m or .yuv files in " + a.from->string());
    for (const fs::path& f : files) {
      auto more = clips_from_frames(read_video_luma(f, a.raw), f.string());
      clips.insert(clips.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
      inputs.push_back(f.string());
    }
  } else {
    const std::size_t n = a.clips ? a.clips : a.count;
    for (std::size_t i = 0; i < n; ++i) {
      const MotionKind kind = parse_motion_kind(a.motions[i % a.motions.size()]);
      clips.push_back(synthesize_clip(derive_seed(a.common.seed, {i, 0x636c6970}), kind, a.clip_size));
    }
  }
  DatasetConfig dc;
  dc.count = a.count;
  dc.crop = a.crop;
  dc.flow_threshold = a.flow_threshold;
  dc.max_qp_diff = a.max_qp_diff;
  dc.seed = a.common.seed;
  const Dataset ds = build_training_set(clips, dc);
  ensure_dir(a.out);
  save_dataset(a.out, ds);

  json j = common_json("dataset", a.common);
  j["source"] = a.from ? json(a.from->string()) : json("synthetic");
  j["inputs"] = inputs;
  j["raw"] = raw_json(a.raw);
  j["count"] = a.count;
  j["crop"] = a.crop;
  j["clip_size"] = a.clip_size;
  j["clips"] = clips.size();
  j["motions"] = a.motions;
  j["flow_threshold"] = a.flow_threshold;
  j["max_qp_diff"] = a.max_qp_diff;
  j["rejected"] = ds.rejected;
  j["output"] = a.out.string();
  write_manifest(a.common.manifest.value_or(a.out / "manifest.json"), j);
  std::cerr << "dataset: " << ds.samples.size() << " samples from " << clips.size() << " clips, " << ds.rejected
            << " crops rejected by the flow filter\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  Common common;
  fs::path data;
  std::optional<fs::path> val;
  std::size_t val_count = 0;
  NetChoice net;
  std::size_t epochs = 70;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::size_t lr_decay_epoch = 30;
  double lr_decay_factor = 0.1;
  std::size_t crop = 128;
  std::string loss = "satd";
  std::optional<fs::path> resume;
  fs::path out;
};

int cmd_train(TrainArgs& a) {
  resolve_seed(a.common);
  std::vector<ClipSample> train_set = load_dataset(a.data), val_set;
  if (a.val) {
    val_set = load_dataset(*a.val);
  } else if (a.val_count > 0) {
    if (a.val_count >= train_set.size()) throw DomainError("--val-count must leave at least one training sample");
    val_set.assign(train_set.end() - static_cast<std::ptrdiff_t>(a.val_count), train_set.end());
    train_set.resize(train_set.size() - a.val_count);
  }
  std::optional<Checkpoint> resume;
  NetConfig cfg = resolve_net(a.net);
  if (a.resume) {
    resume = load_checkpoint(*a.resume);
    cfg = resume->config;
  }
  ensure_dir(a.out);

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch_size;
  tc.lr = a.lr;
  tc.lr_decay_epoch = a.lr_decay_epoch;
  tc.lr_decay_factor = a.lr_decay_factor;
  tc.crop = a.crop;
  tc.loss.kind = parse_loss_kind(a.loss);
  tc.seed = a.common.seed;
  tc.threads = a.common.threads;
  tc.checkpoint_path = a.out / "model.fkc";
  tc.trace_path = a.out / "trace.csv";

  json j = common_json("train", a.common);
  j["data"] = a.data.string();
  j["val"] = a.val ? json(a.val->string()) : json(nullptr);
  j["val_count"] = a.val_count;
  j["net_config"] = json::parse(cfg.to_json());
  j["epochs"] = a.epochs;
  j["batch_size"] = a.batch_size;
  j["lr"] = a.lr;
  j["lr_decay_epoch"] = a.lr_decay_epoch;
  j["lr_decay_factor"] = a.lr_decay_factor;
  j["crop"] = a.crop;
  j["loss"] = to_string(tc.loss.kind);
  j["loss_weights"] = {tc.loss.alpha, tc.loss.beta, tc.loss.gamma};
  j["resume"] = a.resume ? json(a.resume->string()) : json(nullptr);
  j["train_samples"] = train_set.size();
  j["val_samples"] = val_set.size();
  j["outputs"] = {{"checkpoint", tc.checkpoint_path->string()}, {"trace", tc.trace_path->string()}};
  write_manifest(a.common.manifest.value_or(a.out / "manifest.json"), j);

  InterpNet net(cfg, derive_seed(a.common.seed, {0x6e6574}));
  const TrainResult r = train(net, train_set, val_set, tc, resume, [](const TraceRow& row) {
    std::cerr << "epoch " << row.epoch << " lr " << row.lr << " train " << row.train_loss << " val " << row.val_loss
              << '\n';
  });
  std::cerr << "train: " << r.step << " steps, checkpoint " << tc.checkpoint_path->string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// interpolate

struct InterpolateArgs {
  Common common;
  fs::path model;
  fs::path left, right;
  std::size_t left_frame = 0, right_frame = 0;
  int qp_left = 32, qp_right = 32;
  RawFormat raw;
  fs::path out;
  std::optional<fs::path> dump_weights;
};

void write_weight_csv(const fs::path& path, const Array& weights) {
  CsvWriter csv(path, {"y", "x", "left", "right"});
  for (std::size_t y = 0; y < weights.dim(1); ++y)
    for (std::size_t x = 0; x < weights.dim(2); ++x) {
      csv.cell(y).cell(x).cell(weights.at(0, y, x)).cell(weights.at(1, y, x));
      csv.end_row();
    }
  csv.close();
}

int cmd_interpolate(InterpolateArgs& a) {
  resolve_seed(a.common);
  const Checkpoint ck = load_checkpoint(a.model);
  const InterpNet net(ck.config, ck.weights);
  const Array l = read_frame(a.left, a.left_frame, a.raw), r = read_frame(a.right, a.right_frame, a.raw);
  const Interpolation out = net.interpolate(l, r, a.qp_left, a.qp_right);
  write_frame(a.out, out.pyramid.full);

  json j = common_json("interpolate", a.common);
  j["model"] = a.model.string();
  j["left"] = {{"path", a.left.string()}, {"frame", a.left_frame}, {"qp", a.qp_left}};
  j["right"] = {{"path", a.right.string()}, {"frame", a.right_frame}, {"qp", a.qp_right}};
  j["raw"] = raw_json(a.raw);
  j["output"] = a.out.string();
  if (a.dump_weights) {
    ensure_dir(*a.dump_weights);
    write_weight_csv(*a.dump_weights / "weights.csv", out.weights);
    double ml = 0, mr = 0;
    const std::size_t n = out.weights.dim(1) * out.weights.dim(2);
    for (std::size_t i = 0; i < n; ++i) {
      ml += out.weights[i];
      mr += out.weights[n + i];
    }
    j["weights"] = {{"path", (*a.dump_weights / "weights.csv").string()},
                    {"mean_left", ml / static_cast<double>(n)},
                    {"mean_right", mr / static_cast<double>(n)}};
    std::cout << "mean_weight_left " << ml / static_cast<double>(n) << "\nmean_weight_right "
              << mr / static_cast<double>(n) << '\n';
  }
  write_manifest(a.common.manifest.value_or(fs::path(a.out.string() + ".manifest.json")), j);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  Common common;
  std::optional<fs::path> input;
  std::optional<std::string> synthetic;
  std::size_t size = 128;
  double motion_amount = 0.5;
  std::size_t frames = 0;
  RawFormat raw;
  std::vector<int> qps{27, 32, 37, 42};
  std::optional<fs::path> model;
  std::string test = "pc";
  int search_range = 16;
  std::string label;
  fs::path out;
};

void write_rd_csv(const fs::path& path, const SequenceRun& run) {
  CsvWriter csv(path, {"qp", "lambda", "rate", "psnr", "rdo_cost", "baseline_rdo_cost", "inter_cus",
                       "pc_eligible_cus", "pc_cus", "pc_ratio", "mean_cu_size"});
  for (const RdPoint& p : run.points) {
    csv.cell(p.qp).cell(p.lambda).cell(p.rate).cell(p.psnr).cell(p.rdo_cost).cell(p.baseline_rdo_cost);
    csv.cell(p.inter_cus).cell(p.pc_eligible_cus).cell(p.pc_cus).cell(p.pc_ratio()).cell(p.mean_cu_size());
    csv.end_row();
  }
  csv.close();
}

void write_histogram_csv(const fs::path& path, const SequenceRun& run) {
  CsvWriter csv(path, {"qp", "cu64", "cu32", "cu16", "cu8"});
  for (const RdPoint& p : run.points) {
    csv.cell(p.qp);
    for (std::size_t c : p.cu_histogram) csv.cell(c);
    csv.end_row();
  }
  csv.close();
}

void write_frames_csv(const fs::path& path, const SequenceRun& run) {
  CsvWriter csv(path, {"qp", "poc", "layer", "rate", "psnr", "cus", "pc_cus", "pc_available"});
  for (std::size_t q = 0; q < run.frames.size(); ++q)
    for (const FrameStats& f : run.frames[q]) {
      csv.cell(run.points[q].qp).cell(f.poc).cell(f.layer).cell(f.rate).cell(f.psnr).cell(f.cus).cell(f.pc_cus);
      csv.cell(f.pc_available ? 1 : 0);
      csv.end_row();
    }
  csv.close();
}

int cmd_simulate(SimulateArgs& a) {
  resolve_seed(a.common);
  if (a.input.has_value() == a.synthetic.has_value()) throw DomainError("give exactly one of --input or --synthetic");
  std::vector<Array> frames;
  std::string label = a.label;
  if (a.input) {
    frames = read_video_luma(*a.input, a.raw);
    if (label.empty()) label = a.input->stem().string();
  } else {
    MotionParams m;
    m.kind = parse_motion_kind(*a.synthetic);
    m.dx = m.dy = a.motion_amount;
    m.angle_deg = a.motion_amount;
    m.zoom = std::exp(a.motion_amount / 100.0);
    m.amplitude = a.motion_amount;
    frames = synthesize_sequence(a.common.seed, m, a.frames ? a.frames : 33, a.size, a.size);
    if (label.empty()) label = "synthetic_" + *a.synthetic;
  }
  if (a.frames && a.frames < frames.size()) frames.resize(a.frames);
  if (frames.size() < 2) throw DomainError("simulate needs at least 2 frames, got " + std::to_string(frames.size()));

  std::optional<InterpNet> net;
  PcGenerator gen;
  if (a.test == "pc") {
    if (!a.model) throw DomainError("--test pc requires --model");
    const Checkpoint ck = load_checkpoint(*a.model);
    net.emplace(ck.config, ck.weights);
    gen = make_pc_generator(*net);
  }
  ensure_dir(a.out);

  SequenceConfig base;
  base.qps = a.qps;
  base.search_range = a.search_range;
  base.threads = a.common.threads;
  base.label = label + "_baseline";
  const SequenceRun anchor = run_sequence(frames, base);
  SequenceConfig test = base;
  test.with_pc = a.test == "pc";
  test.label = label + (test.with_pc ? "_with_pc" : "_baseline");
  const SequenceRun tested = test.with_pc ? run_sequence(frames, test, gen) : run_sequence(frames, test);

  const std::string tname = test.with_pc ? "with_pc" : "baseline_repeat";
  write_rd_csv(a.out / "rd_baseline.csv", anchor);
  write_rd_csv(a.out / ("rd_" + tname + ".csv"), tested);
  write_histogram_csv(a.out / "cu_hist_baseline.csv", anchor);
  write_histogram_csv(a.out / ("cu_hist_" + tname + ".csv"), tested);
  write_frames_csv(a.out / "frames_baseline.csv", anchor);
  write_frames_csv(a.out / ("frames_" + tname + ".csv"), tested);
  {
    CsvWriter sel(a.out / "selection.csv", {"sequence", "qp", "pc_eligible_cus", "pc_cus", "pc_ratio"});
    for (const RdPoint& p : tested.points) {
      sel.cell(label).cell(p.qp).cell(p.pc_eligible_cus).cell(p.pc_cus).cell(p.pc_ratio());
      sel.end_row();
    }
    sel.close();
  }
  std::optional<double> bd;
  std::string bd_note;
  try {
    bd = bd_rate(curve_of(anchor), curve_of(tested));
  } catch (const DomainError& e) {
    bd_note = e.what();
  }
  {
    CsvWriter rep(a.out / "bdrate.csv", {"sequence", "frames", "bd_rate_percent", "note"});
    rep.cell(label).cell(frames.size());
    if (bd) {
      rep.cell(*bd);
    } else {
      rep.cell(std::string("nan"));
    }
    rep.cell(bd_note).end_row();
    rep.close();
  }

  json j = common_json("simulate", a.common);
  j["input"] = a.input ? json(a.input->string()) : json(nullptr);
  j["synthetic"] = a.synthetic ? json(*a.synthetic) : json(nullptr);
  j["size"] = a.size;
  j["motion_amount"] = a.motion_amount;
  j["frames"] = frames.size();
  j["raw"] = raw_json(a.raw);
  j["qps"] = a.qps;
  j["model"] = a.model ? json(a.model->string()) : json(nullptr);
  j["test"] = a.test;
  j["with_pc"] = test.with_pc;
  j["search_range"] = a.search_range;
  j["label"] = label;
  j["bd_rate_percent"] = bd ? json(*bd) : json(nullptr);
  j["output"] = a.out.string();
  write_manifest(a.common.manifest.value_or(a.out / "manifest.json"), j);

  std::cout << "sequence " << label << " frames " << frames.size() << '\n';
  for (std::size_t i = 0; i < anchor.points.size(); ++i) {
    std::cout << "qp " << anchor.points[i].qp << " baseline rate " << anchor.points[i].rate << " psnr "
              << anchor.points[i].psnr << " | " << tname << " rate " << tested.points[i].rate << " psnr "
              << tested.points[i].psnr << " pc_ratio " << tested.points[i].pc_ratio() << '\n';
  }
  if (bd) {
    std::cout << "bd_rate_percent " << *bd << '\n';
  } else {
    std::cout << "bd_rate_percent nan (" << bd_note << ")\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bdrate

struct BdArgs {
  Common common;
  fs::path anchor, test;
  std::optional<fs::path> out;
};

BdCurve read_curve(const fs::path& path) {
  const auto rows = read_csv(path);
  if (rows.size() < 2) throw FormatError(path.string() + " has no data rows");
  std::optional<std::size_t> rc, pc;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    if (rows[0][i] == "rate") rc = i;
    if (rows[0][i] == "psnr") pc = i;
  }
  if (!rc || !pc) throw FormatError(path.string() + " needs 'rate' and 'psnr' columns");
  BdCurve c;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    try {
      c.push_back({std::stod(rows[r].at(*rc)), std::stod(rows[r].at(*pc))});
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": row " + std::to_string(r) + " is not numeric");
    }
  }
  return c;
}

int cmd_bdrate(BdArgs& a) {
  resolve_seed(a.common);
  const double bd = bd_rate(read_curve(a.anchor), read_curve(a.test));
  std::cout << "bd_rate_percent " << bd << '\n';
  json j = common_json("bdrate", a.common);
  j["anchor"] = a.anchor.string();
  j["test"] = a.test.string();
  j["bd_rate_percent"] = bd;
  if (a.out) {
    CsvWriter csv(*a.out, {"anchor", "test", "bd_rate_percent"});
    csv.cell(a.anchor.string()).cell(a.test.string()).cell(bd).end_row();
    csv.close();
    j["output"] = a.out->string();
  }
  if (a.common.manifest) {
    write_manifest(*a.common.manifest, j);
  } else if (a.out) {
    write_manifest(fs::path(a.out->string() + ".manifest.json"), j);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  Common common;
  std::optional<std::string> fault;
  std::optional<fs::path> report;
};

int cmd_verify(VerifyArgs& a) {
  resolve_seed(a.common);
  VerifyOptions opt;
  opt.seed = a.common.seed;
  opt.skip_rank2 = a.fault && *a.fault == "skip-rank2";
  const auto results = run_invariant_checks(opt);
  bool ok = true;
  for (const CheckResult& r : results) {
    ok = ok && r.passed;
    std::printf("%s %-36s measured %.3e tolerance %.3e\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.measured,
                r.tolerance);
  }
  json j = common_json("verify", a.common);
  j["fault"] = a.fault ? json(*a.fault) : json(nullptr);
  j["passed"] = ok;
  if (a.report) {
    CsvWriter csv(*a.report, {"check", "measured", "tolerance", "passed"});
    for (const CheckResult& r : results) csv.cell(r.name).cell(r.measured).cell(r.tolerance).cell(r.passed ? 1 : 0).end_row();
    csv.close();
    j["report"] = a.report->string();
  }
  if (a.common.manifest) {
    write_manifest(*a.common.manifest, j);
  } else if (a.report) {
    write_manifest(fs::path(a.report->string() + ".manifest.json"), j);
  }
  std::printf("%s: %zu checks\n", ok ? "all passed" : "verification failed", results.size());
  return ok ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fkinterp: quality-aware frame interpolation and codec simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  DatasetArgs ds;
  auto* c_ds = app.add_subcommand("dataset", "Build a degraded-reference training set");
  add_common(c_ds, ds.common);
  c_ds->add_flag("--synthetic", ds.synthetic, "Use procedurally generated clips");
  c_ds->add_option("--from", ds.from, "Directory of .y4m/.yuv clips");
  c_ds->add_option("--count", ds.count, "Number of samples")->check(CLI::PositiveNumber);
  c_ds->add_option("--crop", ds.crop, "Sample crop size");
  c_ds->add_option("--clip-size", ds.clip_size, "Synthetic clip size");
  c_ds->add_option("--clips", ds.clips, "Number of synthetic clips (default: --count)");
  c_ds->add_option("--motions", ds.motions, "Synthetic motion kinds")
      ->check(CLI::IsMember({"translate", "rotate", "zoom", "deform"}))
      ->delimiter(',');
  c_ds->add_option("--flow-threshold", ds.flow_threshold, "Reject crops moving more than this (pixels)");
  c_ds->add_option("--max-qp-diff", ds.max_qp_diff, "Maximum QP difference between references");
  add_raw_options(c_ds, ds.raw);
  c_ds->add_option("--out", ds.out, "Output directory")->required();
  c_ds->callback([&] {
    if (ds.synthetic == ds.from.has_value()) throw CLI::ValidationError("give exactly one of --synthetic or --from");
  });

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train the interpolation network");
  add_common(c_tr, tr.common);
  c_tr->add_option("--data", tr.data, "Dataset directory")->required();
  c_tr->add_option("--val", tr.val, "Validation dataset directory");
  c_tr->add_option("--val-count", tr.val_count, "Hold out the last N samples of --data for validation");
  add_net_options(c_tr, tr.net);
  c_tr->add_option("--epochs", tr.epochs, "Epochs");
  c_tr->add_option("--batch-size", tr.batch_size, "Batch size")->check(CLI::PositiveNumber);
  c_tr->add_option("--lr", tr.lr, "Learning rate");
  c_tr->add_option("--lr-decay-epoch", tr.lr_decay_epoch, "Epoch at which the rate is multiplied by the factor");
  c_tr->add_option("--lr-decay-factor", tr.lr_decay_factor, "Learning-rate decay factor");
  c_tr->add_option("--crop", tr.crop, "Training crop size");
  c_tr->add_option("--loss", tr.loss, "Loss")->check(CLI::IsMember({"l1", "satd"}));
  c_tr->add_option("--resume", tr.resume, "Checkpoint to resume from");
  c_tr->add_option("--out", tr.out, "Output directory")->required();

  InterpolateArgs ip;
  auto* c_ip = app.add_subcommand("interpolate", "Synthesize the frame between two references");
  add_common(c_ip, ip.common);
  c_ip->add_option("--model", ip.model, "Checkpoint")->required();
  c_ip->add_option("--left", ip.left, "Left reference (.pgm, .y4m or .yuv)")->required();
  c_ip->add_option("--right", ip.right, "Right reference (.pgm, .y4m or .yuv)")->required();
  c_ip->add_option("--left-frame", ip.left_frame, "Frame index inside a video left input");
  c_ip->add_option("--right-frame", ip.right_frame, "Frame index inside a video right input");
  c_ip->add_option("--qp-left", ip.qp_left, "QP of the left reference")->check(CLI::Range(0, kMaxQp));
  c_ip->add_option("--qp-right", ip.qp_right, "QP of the right reference")->check(CLI::Range(0, kMaxQp));
  add_raw_options(c_ip, ip.raw);
  c_ip->add_option("--out", ip.out, "Output frame (.pgm, .y4m or .yuv)")->required();
  c_ip->add_option("--dump-weights", ip.dump_weights, "Directory for per-reference weighting maps");

  SimulateArgs sm;
  auto* c_sm = app.add_subcommand("simulate", "Run the codec simulation with and without PC pictures");
  add_common(c_sm, sm.common);
  c_sm->add_option("--input", sm.input, "Input video (.y4m or .yuv)");
  c_sm->add_option("--synthetic", sm.synthetic, "Generate a synthetic sequence of this motion kind")
      ->check(CLI::IsMember({"translate", "rotate", "zoom", "deform"}));
  c_sm->add_option("--size", sm.size, "Synthetic frame size");
  c_sm->add_option("--motion", sm.motion_amount, "Synthetic per-frame motion (pixels or degrees)");
  c_sm->add_option("--frames", sm.frames, "Number of frames to code");
  add_raw_options(c_sm, sm.raw);
  c_sm->add_option("--qps", sm.qps, "QP set")->delimiter(',')->check(CLI::Range(0, kMaxQp));
  c_sm->add_option("--model", sm.model, "Checkpoint used to generate PC pictures");
  c_sm->add_option("--test", sm.test, "Test configuration")->check(CLI::IsMember({"pc", "baseline"}));
  c_sm->add_option("--search-range", sm.search_range, "Motion search range")->check(CLI::Range(0, 64));
  c_sm->add_option("--label", sm.label, "Sequence label in reports");
  c_sm->add_option("--out", sm.out, "Output directory")->required();

  BdArgs bd;
  auto* c_bd = app.add_subcommand("bdrate", "BD-rate between two RD CSV files");
  add_common(c_bd, bd.common);
  c_bd->add_option("--anchor", bd.anchor, "Anchor RD CSV (rate, psnr columns)")->required();
  c_bd->add_option("--test", bd.test, "Test RD CSV (rate, psnr columns)")->required();
  c_bd->add_option("--out", bd.out, "Optional CSV report");

  VerifyArgs vf;
  auto* c_vf = app.add_subcommand("verify", "Run the built-in invariant checks");
  add_common(c_vf, vf.common);
  c_vf->add_option("--inject-fault", vf.fault, "Deliberately break a component")->check(CLI::IsMember({"skip-rank2"}));
  c_vf->add_option("--report", vf.report, "CSV report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_ds->parsed()) return cmd_dataset(ds);
    if (c_tr->parsed()) return cmd_train(tr);
    if (c_ip->parsed()) return cmd_interpolate(ip);
    if (c_sm->parsed()) return cmd_simulate(sm);
    if (c_bd->parsed()) return cmd_bdrate(bd);
    if (c_vf->parsed()) return cmd_verify(vf);
  } catch (const DivergenceError& e) {
    std::cerr << "fkinterp: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const IoError& e) {
    std::cerr << "fkinterp: I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "fkinterp: format error: " << e.what() << '\n';
    return kExitIo;
  } catch (const CheckpointError& e) {
    std::cerr << "fkinterp: checkpoint error: " << e.what() << '\n';
    return kExitIo;
  } catch (const DomainError& e) {
    std::cerr << "fkinterp: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "fkinterp: error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}
