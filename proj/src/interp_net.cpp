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

#include "fkinterp/interp_net.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <random>

#include "fkinterp/error.hpp"
#include "fkinterp/ops.hpp"

namespace fkinterp {
namespace {

constexpr std::array<const char*, 4> kKernelMaps{"vl", "hl", "vr", "hr"};

// Standard deviation of the final-layer weights of every head. Outputs start
// within ~1e-4 of their bias.
constexpr double kHeadOutputInitStd = 1e-5;

// Normalized binomial coefficients of odd length n.
std::vector<double> binomial_taps(std::size_t n) {
  std::vector<double> b{1.0};
  for (std::size_t i = 1; i < n; ++i) {
    std::vector<double> next(b.size() + 1, 0.0);
    for (std::size_t k = 0; k < b.size(); ++k) {
      next[k] += b[k];
      next[k + 1] += b[k];
    }
    b = std::move(next);
  }
  const double total = std::ldexp(1.0, static_cast<int>(n) - 1);
  for (double& v : b) v /= total;
  return b;
}

std::string head_prefix(std::size_t scale, const std::string& map) {
  return "head.s" + std::to_string(scale) + "." + map;
}

// Decoder level holding the features of synthesis scale s (0: 1/4, 1: 1/2, 2: 1).
std::size_t feature_level(std::size_t scale) { return 2 - scale; }

}  // namespace

NetConfig NetConfig::toy() {
  NetConfig c;
  c.depth = 3;
  c.widths = {8, 16, 24, 32};
  c.kernel_lengths = {5, 7, 9};
  c.rank = 2;
  c.head_width = 8;
  c.head_depth = 4;
  return c;
}

NetConfig NetConfig::tiny() {
  NetConfig c;
  c.depth = 2;
  c.widths = {2, 3, 3};
  c.kernel_lengths = {3, 3, 5};
  c.rank = 1;
  c.head_width = 2;
  c.head_depth = 4;
  return c;
}

void NetConfig::validate() const {
  if (depth < 2) throw DomainError("NetConfig: depth must be at least 2 (features at 1/4 are required)");
  if (depth > 8) throw DomainError("NetConfig: depth must be at most 8");
  if (widths.size() != depth + 1) {
    throw DomainError("NetConfig: expected " + std::to_string(depth + 1) + " channel widths, got " +
                      std::to_string(widths.size()));
  }
  for (std::size_t w : widths) {
    if (w == 0) throw DomainError("NetConfig: channel widths must be positive");
  }
  for (std::size_t n : kernel_lengths) {
    if (n == 0 || n % 2 == 0) throw DomainError("NetConfig: kernel lengths must be odd");
  }
  if (rank == 0) throw DomainError("NetConfig: rank must be positive");
  if (head_width == 0 || head_depth == 0) throw DomainError("NetConfig: head width and depth must be positive");
  if (references != 2) throw DomainError("NetConfig: exactly two references are supported");
}

std::string NetConfig::to_json() const {
  nlohmann::json j;
  j["depth"] = depth;
  j["widths"] = widths;
  j["kernel_lengths"] = kernel_lengths;
  j["rank"] = rank;
  j["head_width"] = head_width;
  j["head_depth"] = head_depth;
  j["references"] = references;
  return j.dump();
}

NetConfig NetConfig::from_json(const std::string& text) {
  NetConfig c;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    c.depth = j.at("depth").get<std::size_t>();
    c.widths = j.at("widths").get<std::vector<std::size_t>>();
    c.kernel_lengths = j.at("kernel_lengths").get<std::array<std::size_t, 3>>();
    c.rank = j.at("rank").get<std::size_t>();
    c.head_width = j.at("head_width").get<std::size_t>();
    c.head_depth = j.at("head_depth").get<std::size_t>();
    c.references = j.value("references", std::size_t{2});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("NetConfig: ") + e.what());
  }
  c.validate();
  return c;
}

double normalize_qp(int qp) {
  if (qp < 0 || qp > kMaxQp) throw DomainError("QP " + std::to_string(qp) + " outside [0, 51]");
  return static_cast<double>(qp) / kMaxQp;
}

Array qp_map(int qp, std::size_t height, std::size_t width) { return Array({1, height, width}, normalize_qp(qp)); }

// ---------------------------------------------------------------------------

void Parameters::add(std::string name, Array value) {
  for (const NamedArray& e : entries_) {
    if (e.name == name) throw Error("Parameters: duplicate name " + name);
  }
  entries_.push_back({std::move(name), std::move(value)});
}

std::size_t Parameters::scalar_count() const {
  std::size_t n = 0;
  for (const NamedArray& e : entries_) n += e.value.size();
  return n;
}

std::size_t Parameters::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw Error("Parameters: no entry named " + name);
}

const Array& Parameters::get(const std::string& name) const { return entries_[index_of(name)].value; }

// ---------------------------------------------------------------------------

InterpNet::InterpNet(NetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  build_layout();
  initialize(seed);
}

InterpNet::InterpNet(NetConfig config, Parameters params) : config_(std::move(config)) {
  config_.validate();
  build_layout();
  if (params.size() != params_.size()) {
    throw ShapeError("InterpNet: expected " + std::to_string(params_.size()) + " weight arrays, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params.name(i) != params_.name(i) || params[i].shape() != params_[i].shape()) {
      throw ShapeError("InterpNet: weight '" + params.name(i) + "' " + shape_to_string(params[i].shape()) +
                       " does not match expected '" + params_.name(i) + "' " + shape_to_string(params_[i].shape()));
    }
  }
  params_ = std::move(params);
}

void InterpNet::build_layout() {
  const auto add_conv = [this](const std::string& prefix, std::size_t in, std::size_t out) {
    params_.add(prefix + ".weight", Array({out, in, 3, 3}));
    params_.add(prefix + ".bias", Array({out}));
  };
  const auto& w = config_.widths;
  add_conv("enc0.conv0", config_.references, w[0]);
  add_conv("enc0.conv1", w[0], w[0]);
  for (std::size_t k = 1; k <= config_.depth; ++k) {
    add_conv("enc" + std::to_string(k) + ".conv0", w[k - 1], w[k]);
    add_conv("enc" + std::to_string(k) + ".conv1", w[k], w[k]);
  }
  for (std::size_t k = config_.depth; k-- > 0;) {
    add_conv("dec" + std::to_string(k) + ".conv0", w[k + 1] + w[k], w[k]);
    add_conv("dec" + std::to_string(k) + ".conv1", w[k], w[k]);
  }
  const auto add_head = [&](const std::string& prefix, std::size_t in, std::size_t out) {
    std::size_t ch = in;
    for (std::size_t j = 0; j < config_.head_depth; ++j) {
      const bool last = j + 1 == config_.head_depth;
      const std::size_t next = last ? out : config_.head_width;
      add_conv(prefix + ".conv" + std::to_string(j), ch, next);
      ch = next;
    }
  };
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t feat = w[feature_level(s)];
    for (const char* m : kKernelMaps) add_head(head_prefix(s, m), feat, config_.rank * config_.kernel_lengths[s]);
    add_head(head_prefix(s, "q"), feat + config_.references, config_.references);
  }
}

void InterpNet::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::string last_conv = ".conv" + std::to_string(config_.head_depth - 1);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const std::string& name = params_.name(i);
    Array& a = params_[i];
    const bool is_weight = name.ends_with(".weight");
    const std::string layer = name.substr(0, name.rfind('.'));
    const bool head_output = layer.starts_with("head.") && layer.ends_with(last_conv);
    if (is_weight) {
      const double fan_in = static_cast<double>(a.dim(1) * 9);
      const double std = head_output ? kHeadOutputInitStd : std::sqrt(2.0 / fan_in);
      for (double& v : a.values()) v = std * normal(rng);
      continue;
    }
    a.fill(0.0);
    if (!head_output) continue;
    // Kernel heads start as the identity tap on the first rank term. With a
    // second term, the finer scales also get a binomial blur b as vertical
    // factor and -b as horizontal factor, so each of those scales starts as
    // an approximate high-pass of the references. Quality heads start at 0.5
    // per reference at every scale; a rank-1 network has no detail term, so
    // only its finest scale starts switched on.
    const std::size_t scale = static_cast<std::size_t>(layer[std::string("head.s").size()] - '0');
    const std::string map = layer.substr(std::string("head.s0.").size(), layer.rfind('.') - std::string("head.s0.").size());
    if (map == "q") {
      a.fill(config_.rank >= 2 || scale == 2 ? 0.5 : 0.0);
      continue;
    }
    const std::size_t n = config_.kernel_lengths[scale];
    a[n / 2] = 1.0;
    if (config_.rank >= 2 && scale > 0) {
      const std::vector<double> b = binomial_taps(std::min<std::size_t>(n, 5));
      const double sign = map.front() == 'h' ? -1.0 : 1.0;
      const std::size_t first = n + n / 2 - b.size() / 2;
      for (std::size_t k = 0; k < b.size(); ++k) a[first + k] = sign * b[k];
    }
  }
}

VarId InterpNet::conv(Tape& tape, const std::vector<VarId>& params, const std::string& prefix, VarId x) const {
  const std::size_t wi = params_.index_of(prefix + ".weight");
  return tape.conv2d_3x3(x, params[wi], params[wi + 1]);
}

FeaturePyramid InterpNet::extract_features(Tape& tape, const std::vector<VarId>& params, VarId refs) const {
  const Array& in = tape.value(refs);
  require_rank3(in, "extract_features");
  const std::size_t m = config_.pad_multiple();
  if (in.dim(1) % m != 0 || in.dim(2) % m != 0) {
    throw ShapeError("extract_features: input " + shape_to_string(in.shape()) + " is not padded to a multiple of " +
                     std::to_string(m));
  }
  const VarId x = tape.scale(refs, 1.0 / 255.0);
  std::vector<VarId> enc;
  VarId h = x;
  for (std::size_t k = 0; k <= config_.depth; ++k) {
    if (k > 0) h = tape.avg_pool2(h);
    const std::string p = "enc" + std::to_string(k);
    h = tape.relu(conv(tape, params, p + ".conv0", h));
    h = tape.relu(conv(tape, params, p + ".conv1", h));
    enc.push_back(h);
  }
  std::vector<VarId> dec(config_.depth + 1);
  dec[config_.depth] = enc[config_.depth];
  for (std::size_t k = config_.depth; k-- > 0;) {
    const VarId up = tape.upsample_bilinear2(dec[k + 1]);
    VarId d = tape.concat_channels({up, enc[k]});
    const std::string p = "dec" + std::to_string(k);
    d = tape.relu(conv(tape, params, p + ".conv0", d));
    d = tape.relu(conv(tape, params, p + ".conv1", d));
    dec[k] = d;
  }
  FeaturePyramid f;
  for (std::size_t s = 0; s < 3; ++s) f.levels[s] = dec[feature_level(s)];
  return f;
}

std::array<TapeKernelField, 3> InterpNet::estimate_kernel_heads(Tape& tape, const std::vector<VarId>& params,
                                                                const FeaturePyramid& features) const {
  std::array<TapeKernelField, 3> out;
  for (std::size_t s = 0; s < 3; ++s) {
    TapeKernelField& k = out[s];
    k.rank = config_.rank;
    k.length = config_.kernel_lengths[s];
    std::array<VarId, 4> maps{};
    for (std::size_t m = 0; m < 4; ++m) {
      VarId h = features.levels[s];
      for (std::size_t j = 0; j < config_.head_depth; ++j) {
        h = conv(tape, params, head_prefix(s, kKernelMaps[m]) + ".conv" + std::to_string(j), h);
        if (j + 1 < config_.head_depth) h = tape.relu(h);
      }
      maps[m] = h;
    }
    k.vertical = {maps[0], maps[2]};
    k.horizontal = {maps[1], maps[3]};
  }
  return out;
}

std::array<VarId, 3> InterpNet::estimate_quality_maps(Tape& tape, const std::vector<VarId>& params,
                                                      const FeaturePyramid& features, int qp_left,
                                                      int qp_right) const {
  std::array<VarId, 3> out{};
  for (std::size_t s = 0; s < 3; ++s) {
    const Array& f = tape.value(features.levels[s]);
    const VarId ql = tape.leaf(qp_map(qp_left, f.dim(1), f.dim(2)));
    const VarId qr = tape.leaf(qp_map(qp_right, f.dim(1), f.dim(2)));
    VarId h = tape.concat_channels({features.levels[s], ql, qr});
    for (std::size_t j = 0; j < config_.head_depth; ++j) {
      h = conv(tape, params, head_prefix(s, "q") + ".conv" + std::to_string(j), h);
      if (j + 1 < config_.head_depth) h = tape.relu(h);
    }
    out[s] = h;
  }
  return out;
}

NetForward InterpNet::record(Tape& tape, const Array& left, const Array& right, int qp_left, int qp_right) const {
  require_same_shape(left, right, "InterpNet references");
  if (left.rank() != 3 || left.dim(0) != 1) throw ShapeError("InterpNet: references must be [1,H,W] planes");
  NetForward fw;
  for (const NamedArray& e : params_.entries()) fw.params.push_back(tape.leaf(e.value));
  const Array refs[2] = {left, right};
  fw.refs = tape.leaf(concat_channels(refs));
  fw.features = extract_features(tape, fw.params, fw.refs);
  const auto kernels = estimate_kernel_heads(tape, fw.params, fw.features);
  const auto quality = estimate_quality_maps(tape, fw.params, fw.features, qp_left, qp_right);
  for (std::size_t s = 0; s < 3; ++s) fw.fields[s] = TapeScaleFields{kernels[s], quality[s]};
  fw.pyramid = record_multiscale_synthesize(tape, fw.refs, fw.fields);
  return fw;
}

Array pad_to_multiple(const Array& a, std::size_t multiple) {
  require_rank3(a, "pad_to_multiple");
  const std::size_t ph = (a.dim(1) + multiple - 1) / multiple * multiple;
  const std::size_t pw = (a.dim(2) + multiple - 1) / multiple * multiple;
  if (ph == a.dim(1) && pw == a.dim(2)) return a;
  return ops::pad_replicate(a, {0, ph - a.dim(1), 0, pw - a.dim(2)});
}

namespace {

Array crop_top_left(const Array& a, std::size_t h, std::size_t w) {
  if (a.dim(1) == h && a.dim(2) == w) return a;
  return ops::crop(a, {0, a.dim(1) - h, 0, a.dim(2) - w});
}

std::size_t scaled(std::size_t extent, std::size_t level) {
  const std::size_t div = std::size_t{1} << (2 - level);
  return (extent + div - 1) / div;
}

}  // namespace

Interpolation InterpNet::interpolate(const Array& left, const Array& right, int qp_left, int qp_right) const {
  require_same_shape(left, right, "interpolate");
  require_rank3(left, "interpolate");
  const std::size_t h = left.dim(1), w = left.dim(2);
  const Array pl = pad_to_multiple(left, config_.pad_multiple());
  const Array pr = pad_to_multiple(right, config_.pad_multiple());
  Tape tape;
  const NetForward fw = record(tape, pl, pr, qp_left, qp_right);

  Interpolation out;
  for (std::size_t s = 0; s < 3; ++s) {
    out.pyramid.at(s) = crop_top_left(tape.value(fw.pyramid.levels[s]), scaled(h, s), scaled(w, s));
    ScaleFields& f = out.fields[s];
    f.kernels.rank = fw.fields[s].kernels.rank;
    f.kernels.length = fw.fields[s].kernels.length;
    for (VarId v : fw.fields[s].kernels.vertical) f.kernels.vertical.push_back(tape.value(v));
    for (VarId v : fw.fields[s].kernels.horizontal) f.kernels.horizontal.push_back(tape.value(v));
    f.quality = tape.value(fw.fields[s].quality);
  }
  out.contributions = crop_top_left(reference_contributions(tape.value(fw.refs), out.fields), h, w);
  out.weights = weighting_maps(out.contributions);
  return out;
}

ScalePyramid average_baseline(const Array& left, const Array& right) {
  require_same_shape(left, right, "average_baseline");
  Array avg = (left + right) * 0.5;
  ScalePyramid p;
  p.half = ops::downscale_half(avg);
  p.quarter = ops::downscale_half(p.half);
  p.full = std::move(avg);
  return p;
}

}  // namespace fkinterp
