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

#include "fkinterp/array.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fkinterp/error.hpp"

namespace fkinterp {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Array::Array(Shape shape, double fill) : shape_(std::move(shape)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("array extents must be positive, got " + shape_to_string(shape_));
  }
  data_.assign(shape_volume(shape_), fill);
}

Array::Array(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("array extents must be positive, got " + shape_to_string(shape_));
  }
  if (shape_volume(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_to_string(shape_) + " does not match " + std::to_string(data_.size()) +
                     " values");
  }
}

std::span<double> Array::channel(std::size_t c) {
  const std::size_t plane = shape_[1] * shape_[2];
  return std::span<double>(data_).subspan(c * plane, plane);
}

std::span<const double> Array::channel(std::size_t c) const {
  const std::size_t plane = shape_[1] * shape_[2];
  return std::span<const double>(data_).subspan(c * plane, plane);
}

Array Array::reshaped(Shape shape) const { return Array(std::move(shape), data_); }

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Array& Array::operator+=(const Array& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Array& Array::operator-=(const Array& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Array& Array::operator*=(double k) {
  for (double& v : data_) v *= k;
  return *this;
}

bool Array::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Array::sum() const noexcept { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Array::abs_max() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Array operator+(Array a, const Array& b) { return a += b; }
Array operator-(Array a, const Array& b) { return a -= b; }
Array operator*(Array a, double k) { return a *= k; }

void require_same_shape(const Array& a, const Array& b, std::string_view what) {
  if (a.shape() == b.shape()) return;
  std::string msg(what);
  msg += ": shape mismatch " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape());
  if (a.rank() == b.rank()) {
    for (std::size_t i = 0; i < a.rank(); ++i) {
      if (a.dim(i) != b.dim(i)) {
        msg += " (dimension " + std::to_string(i) + ")";
        break;
      }
    }
  }
  throw ShapeError(msg);
}

void require_rank3(const Array& a, std::string_view what) {
  if (a.rank() != 3) {
    throw ShapeError(std::string(what) + ": expected a [C,H,W] array, got " + shape_to_string(a.shape()));
  }
}

void require_finite(const Array& a, std::string_view what) {
  if (!a.all_finite()) throw NumericError(std::string(what) + ": non-finite value");
}

Array concat_channels(std::span<const Array> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  require_rank3(parts[0], "concat_channels");
  const std::size_t h = parts[0].dim(1), w = parts[0].dim(2);
  std::size_t channels = 0;
  for (const Array& p : parts) {
    require_rank3(p, "concat_channels");
    if (p.dim(1) != h) throw ShapeError("concat_channels: height mismatch (dimension 1)");
    if (p.dim(2) != w) throw ShapeError("concat_channels: width mismatch (dimension 2)");
    channels += p.dim(0);
  }
  Array out({channels, h, w});
  double* dst = out.data();
  for (const Array& p : parts) dst = std::copy(p.data(), p.data() + p.size(), dst);
  return out;
}

Array slice_channels(const Array& a, std::size_t first, std::size_t count) {
  require_rank3(a, "slice_channels");
  if (count == 0 || first + count > a.dim(0)) throw ShapeError("slice_channels: channel range out of bounds");
  const std::size_t plane = a.dim(1) * a.dim(2);
  std::vector<double> v(a.data() + first * plane, a.data() + (first + count) * plane);
  return Array({count, a.dim(1), a.dim(2)}, std::move(v));
}

}  // namespace fkinterp
