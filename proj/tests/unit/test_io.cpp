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

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fkinterp/checkpoint.hpp"
#include "fkinterp/error.hpp"
#include "fkinterp/video_io.hpp"
#include "test_support.hpp"

using namespace fkinterp;
using fkinterp::testing::Gen;
using fkinterp::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

YuvFrame random_frame(Gen& g, std::size_t w, std::size_t h) {
  YuvFrame f(w, h);
  for (auto* plane : {&f.y, &f.u, &f.v})
    for (auto& s : *plane) s = static_cast<std::uint8_t>(g.integer(0, 255));
  return f;
}

Checkpoint small_checkpoint(bool with_optimizer) {
  NetConfig cfg = NetConfig::tiny();
  InterpNet net(cfg, 11);
  Checkpoint c{cfg, net.parameters(), 42, std::nullopt};
  if (with_optimizer) {
    AdamaxState st = AdamaxState::zeros_like(net.parameters());
    Gen g(3);
    for (auto& a : st.m)
      for (double& v : a.storage()) v = g.normal();
    for (auto& a : st.u)
      for (double& v : a.storage()) v = g.uniform(0, 1);
    st.t = 9;
    c.optimizer = st;
  }
  return c;
}

CheckpointError::Kind kind_of(const std::string& bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("expected CheckpointError");
  return CheckpointError::Kind::kCorrupt;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("y4m round trip is bit-exact including header tags") {
    TempDir dir("y4m");
    Gen g(51);
    Y4mVideo v;
    v.header.params = {{'W', "13"}, {'H', "7"}, {'F', "25:1"}, {'I', "p"}, {'A', "1:1"}, {'C', "420jpeg"},
                       {'X', "YSCSS=420JPEG"}};
    for (int i = 0; i < 3; ++i) v.frames.push_back(random_frame(g, 13, 7));
    v.frame_params = {"", " Ixyz", ""};
    const auto path = dir / "a.y4m";
    write_y4m(path, v);
    Y4mVideo back = read_y4m(path);
    CHECK(back.header == v.header);
    CHECK(back.frames == v.frames);
    CHECK(back.frame_params == v.frame_params);
    CHECK(back.header.width() == 13);
    CHECK(back.frames[0].chroma_width() == 7);
    CHECK(back.frames[0].chroma_height() == 4);

    const auto path2 = dir / "b.y4m";
    write_y4m(path2, back);
    CHECK(slurp(path) == slurp(path2));
  }

  TEST_CASE("y4m monochrome and defaults") {
    TempDir dir("mono");
    Gen g(52);
    std::string bytes = "YUV4MPEG2 W4 H2 F30:1 Cmono\nFRAME\n";
    std::string luma(8, '\0');
    for (auto& c : luma) c = static_cast<char>(g.integer(0, 255));
    spit(dir / "m.y4m", bytes + luma);
    Y4mVideo v = read_y4m(dir / "m.y4m");
    REQUIRE(v.frames.size() == 1);
    CHECK(v.header.monochrome());
    CHECK(v.frames[0].y == std::vector<std::uint8_t>(luma.begin(), luma.end()));
    CHECK(v.frames[0].u == std::vector<std::uint8_t>(2 * 1, 128));

    CHECK(Y4mHeader::make(8, 8).colorspace() == "420jpeg");
  }

  TEST_CASE("y4m malformed input") {
    TempDir dir("bad");
    spit(dir / "sig.y4m", "YUV4MPEG3 W4 H4\n");
    CHECK_THROWS_AS(read_y4m(dir / "sig.y4m"), FormatError);
    spit(dir / "nowidth.y4m", "YUV4MPEG2 H4\n");
    CHECK_THROWS_AS(read_y4m(dir / "nowidth.y4m"), FormatError);
    spit(dir / "c444.y4m", "YUV4MPEG2 W4 H4 C444\n");
    CHECK_THROWS_AS(read_y4m(dir / "c444.y4m"), FormatError);
    spit(dir / "short.y4m", "YUV4MPEG2 W4 H4\nFRAME\n" + std::string(10, 'a'));
    CHECK_THROWS_AS(read_y4m(dir / "short.y4m"), FormatError);
    CHECK_THROWS_AS(read_y4m(dir / "missing.y4m"), IoError);
  }

  TEST_CASE("raw yuv420 round trip and size validation") {
    TempDir dir("yuv");
    Gen g(53);
    std::vector<YuvFrame> frames{random_frame(g, 6, 4), random_frame(g, 6, 4)};
    write_yuv420(dir / "a.yuv", frames);
    CHECK(std::filesystem::file_size(dir / "a.yuv") == 2 * (24 + 2 * 6));
    CHECK(read_yuv420(dir / "a.yuv", 6, 4) == frames);
    CHECK_THROWS_AS(read_yuv420(dir / "a.yuv", 5, 4), FormatError);
    CHECK_THROWS_AS(read_yuv420(dir / "none.yuv", 6, 4), IoError);
  }

  TEST_CASE("pgm binary and ascii") {
    TempDir dir("pgm");
    Gen g(54);
    Array plane = g.samples(1, 5, 7);
    write_pgm(dir / "a.pgm", plane);
    CHECK(read_pgm(dir / "a.pgm") == plane);

    spit(dir / "b.pgm", "P2\n# comment\n3 2\n15\n0 5 10\n15 1 2\n");
    Array b = read_pgm(dir / "b.pgm");
    CHECK(b.shape() == Shape{1, 2, 3});
    CHECK(b.at(0, 1, 0) == 15.0);
    spit(dir / "c.pgm", "P5\n2 2\n65535\n");
    CHECK_THROWS_AS(read_pgm(dir / "c.pgm"), FormatError);
  }

  TEST_CASE("sample rounding") {
    CHECK(to_sample(-3.0) == 0);
    CHECK(to_sample(254.5) == 255);
    CHECK(to_sample(1.49) == 1);
    CHECK(to_sample(300.0) == 255);
    CHECK(to_sample(std::nan("")) == 0);
    Array p({1, 1, 2}, std::vector<double>{12.6, 300.0});
    YuvFrame f = YuvFrame::from_luma(p);
    CHECK(f.y == std::vector<std::uint8_t>{13, 255});
    CHECK(f.u == std::vector<std::uint8_t>{128});
  }

  TEST_CASE("csv writer and reader") {
    TempDir dir("csv");
    {
      CsvWriter w(dir / "a.csv", {"name", "value", "count"});
      w.cell("plain").cell(0.1).cell(3).end_row();
      w.cell("has,comma \"q\"").cell(-2.5e-7).cell(std::size_t{0}).end_row();
      w.cell("short");
      CHECK_THROWS_AS(w.end_row(), FormatError);
    }
    auto rows = read_csv(dir / "a.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"name", "value", "count"});
    CHECK(rows[1][1] == "0.1");
    CHECK(rows[2][0] == "has,comma \"q\"");
    CHECK(std::stod(rows[2][1]) == -2.5e-7);
  }

  TEST_CASE("checkpoint round trip is bit-exact") {
    TempDir dir("ckpt");
    for (bool opt : {false, true}) {
      Checkpoint c = small_checkpoint(opt);
      save_checkpoint(c, dir / "c.fkc");
      Checkpoint back = load_checkpoint(dir / "c.fkc");
      CHECK(back.config == c.config);
      CHECK(back.weights == c.weights);
      CHECK(back.step == 42);
      CHECK(back.optimizer == c.optimizer);
      CHECK(serialize_checkpoint(back) == serialize_checkpoint(c));
    }
    CHECK_FALSE(std::filesystem::exists(dir / "c.fkc.tmp"));
  }

  TEST_CASE("checkpoint corruption, version and config errors are distinct") {
    const std::string good = serialize_checkpoint(small_checkpoint(true));
    CHECK(std::memcmp(good.data(), kCheckpointMagic, 8) == 0);

    CHECK(kind_of(good.substr(0, good.size() / 2)) == CheckpointError::Kind::kCorrupt);
    CHECK(kind_of(good.substr(0, 5)) == CheckpointError::Kind::kCorrupt);
    CHECK(kind_of(good + "x") == CheckpointError::Kind::kCorrupt);

    std::string flipped = good;
    flipped[good.size() / 2] ^= 0x10;
    CHECK(kind_of(flipped) == CheckpointError::Kind::kCorrupt);

    std::string magic = good;
    magic[0] = 'X';
    CHECK(kind_of(magic) == CheckpointError::Kind::kCorrupt);

    std::string version = good;
    version[8] = 2;
    CHECK(kind_of(version) == CheckpointError::Kind::kVersionMismatch);

    TempDir dir("ckpt2");
    save_checkpoint(small_checkpoint(false), dir / "c.fkc");
    NetConfig other = NetConfig::tiny();
    other.rank = other.rank + 1;
    try {
      load_checkpoint(dir / "c.fkc", other);
      FAIL("expected config mismatch");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::kConfigMismatch);
    }
    CHECK_NOTHROW(load_checkpoint(dir / "c.fkc", NetConfig::tiny()));
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.fkc"), IoError);
  }

  TEST_CASE("property: random bit flips never load silently") {
    const std::string good = serialize_checkpoint(small_checkpoint(false));
    Gen g(55);
    for (int trial = 0; trial < 40; ++trial) {
      std::string bad = good;
      const std::size_t pos = g.size(0, bad.size() - 1);
      bad[pos] = static_cast<char>(bad[pos] ^ (1 << g.integer(0, 7)));
      CHECK_THROWS_AS(deserialize_checkpoint(bad), CheckpointError);
    }
  }
}
