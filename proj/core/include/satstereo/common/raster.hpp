// __BEGIN_LICENSE__
//  Copyright (c) 2026, the satstereo authors.
//
//  Licensed under the Apache License, Version 2.0 (the "License"); you may
//  not use this file except in compliance with the License. You may obtain a
//  copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.
// __END_LICENSE__

#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "satstereo/common/error.hpp"

namespace satstereo {

/// Row-major 2D image with value semantics.
template <class T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Raster(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw InvalidArgument("Raster: data length does not match dimensions");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  const T& operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  bool contains(std::ptrdiff_t r, std::ptrdiff_t c) const noexcept {
    return r >= 0 && c >= 0 && static_cast<std::size_t>(r) < rows_ &&
           static_cast<std::size_t>(c) < cols_;
  }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  /// Copy of the window [r0, r0+rows) x [c0, c0+cols); must lie inside.
  Raster crop(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const {
    if (r0 + rows > rows_ || c0 + cols > cols_) {
      throw InvalidArgument("Raster::crop: window outside raster");
    }
    Raster out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>((r0 + r) * cols_ + c0), cols,
                  out.data_.begin() + static_cast<std::ptrdiff_t>(r * cols));
    }
    return out;
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using ImageF = Raster<float>;
/// Validity mask; nonzero means valid.
using Mask = Raster<std::uint8_t>;

inline std::size_t count_valid(const Mask& m) {
  return static_cast<std::size_t>(
      std::count_if(m.pixels().begin(), m.pixels().end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace satstereo
