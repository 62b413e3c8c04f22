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

#include "fkinterp/video_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <iterator>
#include <sstream>

#include "fkinterp/error.hpp"

namespace fkinterp {
namespace {

constexpr std::string_view kY4mMagic = "YUV4MPEG2";
constexpr std::size_t kMaxHeaderLine = 4096;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return data;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::size_t parse_extent(const std::string& s, char tag) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v == 0 || v > 65536) {
    throw FormatError(std::string("Y4M: invalid ") + tag + " value '" + s + "'");
  }
  return v;
}

// Reads one '\n'-terminated line starting at `pos`; advances past the newline.
std::string take_line(const std::string& data, std::size_t& pos, std::string_view what) {
  const std::size_t nl = data.find('\n', pos);
  if (nl == std::string::npos || nl - pos > kMaxHeaderLine) {
    throw FormatError("Y4M: unterminated " + std::string(what) + " line");
  }
  std::string line = data.substr(pos, nl - pos);
  pos = nl + 1;
  return line;
}

void write_plane(std::ofstream& out, const std::vector<std::uint8_t>& p) {
  out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size()));
}

void copy_plane(const std::string& data, std::size_t& pos, std::vector<std::uint8_t>& dst) {
  std::copy(data.begin() + static_cast<std::ptrdiff_t>(pos),
            data.begin() + static_cast<std::ptrdiff_t>(pos + dst.size()), dst.begin());
  pos += dst.size();
}

}  // namespace

YuvFrame::YuvFrame(std::size_t w, std::size_t h)
    : width(w), height(h), y(w * h, 0), u(((w + 1) / 2) * ((h + 1) / 2), 128), v(u.size(), 128) {
  if (w == 0 || h == 0) throw ShapeError("YuvFrame: zero extent");
}

Array YuvFrame::luma() const {
  Array a({1, height, width});
  for (std::size_t i = 0; i < y.size(); ++i) a[i] = y[i];
  return a;
}

YuvFrame YuvFrame::from_luma(const Array& plane) {
  require_rank3(plane, "YuvFrame::from_luma");
  YuvFrame f(plane.dim(2), plane.dim(1));
  for (std::size_t i = 0; i < f.y.size(); ++i) f.y[i] = to_sample(plane[i]);
  return f;
}

std::uint8_t to_sample(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v));
}

Y4mHeader Y4mHeader::make(std::size_t width, std::size_t height, int fps_num, int fps_den) {
  Y4mHeader h;
  h.params = {{'W', std::to_string(width)},
              {'H', std::to_string(height)},
              {'F', std::to_string(fps_num) + ":" + std::to_string(fps_den)},
              {'I', "p"},
              {'A', "1:1"},
              {'C', "420jpeg"}};
  return h;
}

std::string Y4mHeader::get(char tag, const std::string& fallback) const {
  for (const auto& [t, v] : params) {
    if (t == tag) return v;
  }
  return fallback;
}

std::size_t Y4mHeader::width() const { return parse_extent(get('W'), 'W'); }
std::size_t Y4mHeader::height() const { return parse_extent(get('H'), 'H'); }
std::string Y4mHeader::colorspace() const { return get('C', "420jpeg"); }
bool Y4mHeader::monochrome() const { return colorspace() == "mono"; }

Y4mVideo read_y4m(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  std::size_t pos = 0;
  const std::string line = take_line(data, pos, "stream header");
  std::istringstream tokens(line);
  std::string tok;
  tokens >> tok;
  if (tok != kY4mMagic) throw FormatError(path.string() + ": not a YUV4MPEG2 stream");
  Y4mVideo video;
  // Tokens are separated by single spaces; parse by hand so empty or doubled
  // separators are rejected instead of silently normalized.
  std::size_t p = kY4mMagic.size();
  while (p < line.size()) {
    if (line[p] != ' ') throw FormatError("Y4M: malformed stream header");
    const std::size_t next = line.find(' ', p + 1);
    const std::string field = line.substr(p + 1, next == std::string::npos ? std::string::npos : next - p - 1);
    if (field.empty()) throw FormatError("Y4M: empty header parameter");
    video.header.params.emplace_back(field[0], field.substr(1));
    p = next == std::string::npos ? line.size() : next;
  }
  if (video.header.get('W').empty() || video.header.get('H').empty()) {
    throw FormatError("Y4M: stream header lacks W or H");
  }
  const std::size_t w = video.header.width(), h = video.header.height();
  const std::string cs = video.header.colorspace();
  const bool mono = cs == "mono";
  if (!mono && cs != "420" && cs != "420jpeg" && cs != "420paldv" && cs != "420mpeg2") {
    throw FormatError("Y4M: unsupported colorspace C" + cs + " (8-bit 4:2:0 or mono only)");
  }
  while (pos < data.size()) {
    const std::string fl = take_line(data, pos, "frame header");
    if (fl.compare(0, 5, "FRAME") != 0 || (fl.size() > 5 && fl[5] != ' ')) {
      throw FormatError("Y4M: expected FRAME marker");
    }
    YuvFrame f(w, h);
    const std::size_t need = f.y.size() + (mono ? 0 : 2 * f.u.size());
    if (data.size() - pos < need) throw FormatError("Y4M: truncated frame " + std::to_string(video.frames.size()));
    copy_plane(data, pos, f.y);
    if (!mono) {
      copy_plane(data, pos, f.u);
      copy_plane(data, pos, f.v);
    }
    video.frame_params.push_back(fl.substr(5));
    video.frames.push_back(std::move(f));
  }
  return video;
}

void write_y4m(const std::filesystem::path& path, const Y4mVideo& video) {
  const std::size_t w = video.header.width(), h = video.header.height();
  const bool mono = video.header.monochrome();
  std::ofstream out = open_out(path);
  out << kY4mMagic;
  for (const auto& [t, v] : video.header.params) out << ' ' << t << v;
  out << '\n';
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    const YuvFrame& f = video.frames[i];
    if (f.width != w || f.height != h) throw ShapeError("write_y4m: frame size differs from header");
    const std::string fp = i < video.frame_params.size() ? video.frame_params[i] : "";
    if (!fp.empty() && fp[0] != ' ') throw FormatError("write_y4m: frame parameters must start with a space");
    out << "FRAME" << fp << '\n';
    write_plane(out, f.y);
    if (!mono) {
      write_plane(out, f.u);
      write_plane(out, f.v);
    }
  }
  finish(out, path);
}

void write_y4m(const std::filesystem::path& path, const std::vector<YuvFrame>& frames, int fps_num, int fps_den) {
  if (frames.empty()) throw DomainError("write_y4m: no frames");
  Y4mVideo v;
  v.header = Y4mHeader::make(frames[0].width, frames[0].height, fps_num, fps_den);
  v.frames = frames;
  write_y4m(path, v);
}

std::vector<YuvFrame> read_yuv420(const std::filesystem::path& path, std::size_t width, std::size_t height) {
  const std::string data = read_file(path);
  const YuvFrame proto(width, height);
  const std::size_t frame_bytes = proto.y.size() + 2 * proto.u.size();
  if (data.empty() || data.size() % frame_bytes != 0) {
    throw FormatError(path.string() + ": size " + std::to_string(data.size()) + " is not a multiple of the " +
                      std::to_string(width) + "x" + std::to_string(height) + " I420 frame size " +
                      std::to_string(frame_bytes));
  }
  std::vector<YuvFrame> frames;
  std::size_t pos = 0;
  while (pos < data.size()) {
    YuvFrame f(width, height);
    copy_plane(data, pos, f.y);
    copy_plane(data, pos, f.u);
    copy_plane(data, pos, f.v);
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_yuv420(const std::filesystem::path& path, const std::vector<YuvFrame>& frames) {
  std::ofstream out = open_out(path);
  for (const YuvFrame& f : frames) {
    write_plane(out, f.y);
    write_plane(out, f.u);
    write_plane(out, f.v);
  }
  finish(out, path);
}

Array read_pgm(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  std::size_t pos = 0;
  // Header tokens: magic, width, height, maxval; '#' starts a comment.
  const auto next_token = [&]() {
    for (;;) {
      while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
      if (pos < data.size() && data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (start == pos) throw FormatError(path.string() + ": truncated PGM header");
    return data.substr(start, pos - start);
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P2") throw FormatError(path.string() + ": not a PGM file");
  const auto number = [&](const char* what) {
    const std::string t = next_token();
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || v == 0) {
      throw FormatError(path.string() + ": invalid PGM " + what);
    }
    return v;
  };
  const std::size_t w = number("width"), h = number("height"), maxval = number("maxval");
  if (maxval > 255) throw FormatError(path.string() + ": 16-bit PGM is not supported");
  Array a({1, h, w});
  if (magic == "P5") {
    ++pos;  // single whitespace after maxval
    if (data.size() < pos + w * h) throw FormatError(path.string() + ": truncated PGM raster");
    for (std::size_t i = 0; i < w * h; ++i) a[i] = static_cast<unsigned char>(data[pos + i]);
  } else {
    for (std::size_t i = 0; i < w * h; ++i) {
      const std::string t = next_token();
      unsigned v = 0;
      const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || v > maxval) throw FormatError(path.string() + ": bad PGM sample");
      a[i] = v;
    }
  }
  return a;
}

void write_pgm(const std::filesystem::path& path, const Array& plane) {
  require_rank3(plane, "write_pgm");
  const std::size_t h = plane.dim(1), w = plane.dim(2);
  std::ofstream out = open_out(path);
  out << "P5\n" << w << ' ' << h << "\n255\n";
  std::vector<std::uint8_t> bytes(w * h);
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_sample(plane[i]);
  write_plane(out, bytes);
  finish(out, path);
}

// ---------------------------------------------------------------------------

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns)
    : out_(open_out(path)), path_(path), columns_(columns.size()) {
  for (const std::string& c : columns) cell(c);
  end_row();
}

void CsvWriter::raw(const std::string& v) {
  if (in_row_ > 0) row_ += ',';
  row_ += v;
  ++in_row_;
}

CsvWriter& CsvWriter::cell(const std::string& v) {
  if (v.find_first_of(",\"\n\r") == std::string::npos) {
    raw(v);
  } else {
    std::string q = "\"";
    for (char ch : v) {
      if (ch == '"') q += '"';
      q += ch;
    }
    raw(q + "\"");
  }
  return *this;
}

CsvWriter& CsvWriter::cell(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  raw(ec == std::errc() ? std::string(buf, p) : std::string("nan"));
  return *this;
}

CsvWriter& CsvWriter::cell(long long v) {
  raw(std::to_string(v));
  return *this;
}

void CsvWriter::end_row() {
  if (in_row_ != columns_) {
    throw FormatError("CsvWriter: row has " + std::to_string(in_row_) + " cells, expected " + std::to_string(columns_));
  }
  out_ << row_ << '\n';
  row_.clear();
  in_row_ = 0;
}

void CsvWriter::close() {
  finish(out_, path_);
  out_.close();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(data);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> row;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cur += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        row.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    row.push_back(std::move(cur));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fkinterp
