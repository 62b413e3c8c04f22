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
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fkinterp {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

/// Dense row-major array of doubles. The last extent varies fastest, so a
/// [C,H,W] array stores channel c, row y, column x at (c*H + y)*W + x.
class Array {
 public:
  Array() = default;
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> values);

  static Array like(const Array& other, double fill = 0.0) { return Array(other.shape_, fill); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // Rank-3 [C,H,W] accessors; unchecked.
  double& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  /// Channel `c` of a rank-3 array as a contiguous [H*W] span.
  std::span<double> channel(std::size_t c);
  std::span<const double> channel(std::size_t c) const;

  /// Reinterprets the storage with a new shape of equal volume.
  Array reshaped(Shape shape) const;

  void fill(double v);
  Array& operator+=(const Array& other);
  Array& operator-=(const Array& other);
  Array& operator*=(double k);

  bool all_finite() const noexcept;
  double sum() const noexcept;
  double abs_max() const noexcept;

  bool operator==(const Array& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Array operator+(Array a, const Array& b);
Array operator-(Array a, const Array& b);
Array operator*(Array a, double k);

/// Throws ShapeError naming `what` when the shapes differ.
void require_same_shape(const Array& a, const Array& b, std::string_view what);
/// Throws ShapeError unless `a` is rank 3.
void require_rank3(const Array& a, std::string_view what);
/// Throws NumericError naming `what` when any value is NaN/Inf.
void require_finite(const Array& a, std::string_view what);

/// Stacks equally shaped rank-3 arrays along the channel axis.
Array concat_channels(std::span<const Array> parts);
/// Copies channels [first, first+count) of a rank-3 array.
Array slice_channels(const Array& a, std::size_t first, std::size_t count);

}  // namespace fkinterp
