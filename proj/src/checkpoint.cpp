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

#include "fkinterp/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fkinterp/error.hpp"

namespace fkinterp {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

using Kind = CheckpointError::Kind;

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const std::string& s) { buf_ += s; }
  void string(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  void array(const std::string& name, const Array& a) {
    string(name);
    pod<std::uint32_t>(static_cast<std::uint32_t>(a.rank()));
    for (std::size_t d : a.shape()) pod<std::uint64_t>(d);
    buf_.append(reinterpret_cast<const char*>(a.data()), a.size() * sizeof(double));
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& s, std::size_t end) : s_(s), end_(end) {}

  void need(std::size_t n) const {
    if (pos_ + n > end_) throw CheckpointError(Kind::kCorrupt, "checkpoint: unexpected end of data");
  }
  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string string() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  NamedArray array() {
    NamedArray e;
    e.name = string();
    const auto rank = pod<std::uint32_t>();
    if (rank == 0 || rank > 8) throw CheckpointError(Kind::kCorrupt, "checkpoint: bad rank for " + e.name);
    Shape shape(rank);
    std::size_t volume = 1;
    for (auto& d : shape) {
      d = pod<std::uint64_t>();
      if (d == 0 || d > (std::size_t{1} << 32)) throw CheckpointError(Kind::kCorrupt, "checkpoint: bad extent");
      volume *= d;
    }
    if (volume > (end_ - pos_) / sizeof(double)) throw CheckpointError(Kind::kCorrupt, "checkpoint: unexpected end of data");
    std::vector<double> values(volume);
    std::memcpy(values.data(), s_.data() + pos_, volume * sizeof(double));
    pos_ += volume * sizeof(double);
    e.value = Array(std::move(shape), std::move(values));
    return e;
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::string& s_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::string& s, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(n));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(std::string(kCheckpointMagic, sizeof(kCheckpointMagic)));
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.string(ckpt.config.to_json());
  w.pod<std::uint64_t>(ckpt.step);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.weights.size()));
  for (const NamedArray& e : ckpt.weights.entries()) w.array(e.name, e.value);
  w.pod<std::uint8_t>(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const AdamaxState& s = *ckpt.optimizer;
    if (s.m.size() != ckpt.weights.size() || s.u.size() != ckpt.weights.size()) {
      throw ShapeError("serialize_checkpoint: optimizer state does not match the weights");
    }
    w.pod<std::uint64_t>(s.t);
    for (std::size_t i = 0; i < s.m.size(); ++i) {
      w.array("m." + ckpt.weights.name(i), s.m[i]);
      w.array("u." + ckpt.weights.name(i), s.u[i]);
    }
  }
  w.pod<std::uint32_t>(crc_of(w.buffer(), w.buffer().size()));
  return std::move(w.buffer());
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  constexpr std::size_t kHeader = sizeof(kCheckpointMagic) + sizeof(std::uint32_t);
  if (bytes.size() < kHeader + sizeof(std::uint32_t) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError(Kind::kCorrupt, "checkpoint: missing magic bytes or file too short");
  }
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + sizeof(kCheckpointMagic), sizeof(version));
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::kVersionMismatch, "checkpoint: format version " + std::to_string(version) +
                                                      ", this build reads version " +
                                                      std::to_string(kCheckpointVersion));
  }
  const std::size_t body = bytes.size() - sizeof(std::uint32_t);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + body, sizeof(stored_crc));
  if (stored_crc != crc_of(bytes, body)) throw CheckpointError(Kind::kCorrupt, "checkpoint: checksum mismatch");

  Reader r(bytes, body);
  (void)r.pod<std::uint64_t>();  // magic
  (void)r.pod<std::uint32_t>();  // version
  Checkpoint ckpt;
  try {
    ckpt.config = NetConfig::from_json(r.string());
  } catch (const Error& e) {
    throw CheckpointError(Kind::kCorrupt, std::string("checkpoint: bad configuration: ") + e.what());
  }
  ckpt.step = r.pod<std::uint64_t>();
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray e = r.array();
    ckpt.weights.add(std::move(e.name), std::move(e.value));
  }
  const auto has_opt = r.pod<std::uint8_t>();
  if (has_opt > 1) throw CheckpointError(Kind::kCorrupt, "checkpoint: bad optimizer flag");
  if (has_opt) {
    AdamaxState s;
    s.t = r.pod<std::uint64_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
      s.m.push_back(r.array().value);
      s.u.push_back(r.array().value);
      if (s.m.back().shape() != ckpt.weights[i].shape() || s.u.back().shape() != ckpt.weights[i].shape()) {
        throw CheckpointError(Kind::kCorrupt, "checkpoint: optimizer state shape mismatch");
      }
    }
    ckpt.optimizer = std::move(s);
  }
  if (!r.done()) throw CheckpointError(Kind::kCorrupt, "checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return deserialize_checkpoint(ss.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const NetConfig& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  if (!(ckpt.config == expected)) {
    throw CheckpointError(Kind::kConfigMismatch, "checkpoint " + path.string() + " was written for configuration " +
                                                     ckpt.config.to_json() + ", expected " + expected.to_json());
  }
  return ckpt;
}

}  // namespace fkinterp
