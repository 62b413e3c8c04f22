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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "fkinterp/array.hpp"

namespace fkinterp {

/// One 8-bit planar 4:2:0 picture. Chroma planes are ceil(W/2) x ceil(H/2).
struct YuvFrame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> y, u, v;

  YuvFrame() = default;
  YuvFrame(std::size_t w, std::size_t h);

  std::size_t chroma_width() const { return (width + 1) / 2; }
  std::size_t chroma_height() const { return (height + 1) / 2; }

  /// Luma as a [1,H,W] array of sample values.
  Array luma() const;
  /// Frame whose luma is round(clip(plane)) and whose chroma is neutral 128.
  static YuvFrame from_luma(const Array& plane);

  bool operator==(const YuvFrame&) const = default;
};

/// Stream header, kept as the ordered list of tagged parameters that follow
/// the "YUV4MPEG2" signature so unknown tags survive a round trip.
struct Y4mHeader {
  std::vector<std::pair<char, std::string>> params;

  static Y4mHeader make(std::size_t width, std::size_t height, int fps_num = 30, int fps_den = 1);

  std::size_t width() const;
  std::size_t height() const;
  /// Value of tag `c`, or `fallback` if absent.
  std::string get(char tag, const std::string& fallback = "") const;
  /// "420jpeg" when no C tag is present.
  std::string colorspace() const;
  bool monochrome() const;

  bool operator==(const Y4mHeader&) const = default;
};

struct Y4mVideo {
  Y4mHeader header;
  std::vector<YuvFrame> frames;
  /// Text after "FRAME" on each frame line, including its leading space
  /// (usually empty).
  std::vector<std::string> frame_params;
};

/// Accepts 8-bit 4:2:0 (C420, C420jpeg, C420paldv, C420mpeg2) and Cmono.
/// Throws IoError / FormatError.
Y4mVideo read_y4m(const std::filesystem::path& path);
void write_y4m(const std::filesystem::path& path, const Y4mVideo& video);
void write_y4m(const std::filesystem::path& path, const std::vector<YuvFrame>& frames, int fps_num = 30,
               int fps_den = 1);

/// Headerless planar I420. The file size must be a whole number of frames.
std::vector<YuvFrame> read_yuv420(const std::filesystem::path& path, std::size_t width, std::size_t height);
void write_yuv420(const std::filesystem::path& path, const std::vector<YuvFrame>& frames);

/// Binary (P5) or ASCII (P2) graymap with maxval <= 255, returned as [1,H,W].
Array read_pgm(const std::filesystem::path& path);
/// Writes channel 0 of a [C,H,W] array as P5, rounding and clipping to 0..255.
void write_pgm(const std::filesystem::path& path, const Array& plane);

/// Rounds half away from zero and clips to 0..255.
std::uint8_t to_sample(double v);

/// Minimal RFC 4180 CSV writer.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns);

  CsvWriter& cell(const std::string& v);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  /// Terminates the current row; throws FormatError if it has the wrong width.
  void end_row();
  void close();

 private:
  void raw(const std::string& v);

  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
  std::string row_;  // written out by end_row()
};

/// Parses a CSV file written by CsvWriter (or any file without embedded
/// newlines in quoted fields). The first row is the header.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace fkinterp
