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

#include <cstddef>

#include <utility>

#include "satstereo/common/error.hpp"
#include "satstereo/common/raster.hpp"

namespace satstereo {

/// Per-pixel horizontal offset x_left - x_right with a validity mask.
/// Values are meaningful (finite) only where valid.
struct DisparityMap {
  ImageF values;
  Mask valid;

  DisparityMap() = default;
  DisparityMap(std::size_t rows, std::size_t cols) : values(rows, cols, 0.0f), valid(rows, cols, 0) {}
  DisparityMap(ImageF v, Mask m) : values(std::move(v)), valid(std::move(m)) {
    if (values.rows() != valid.rows() || values.cols() != valid.cols()) {
      throw InvalidArgument("DisparityMap: values and mask differ in shape");
    }
  }

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }
  std::size_t valid_count() const { return count_valid(valid); }
  /// Fraction of valid pixels.
  double density() const {
    return values.size() == 0 ? 0.0 : static_cast<double>(valid_count()) / static_cast<double>(values.size());
  }

  friend bool operator==(const DisparityMap&, const DisparityMap&) = default;
};

/// LiDAR-derived ground truth straight from projection (sparse) and after
/// piecewise-linear densification (dense).
using SparseDisparity = DisparityMap;
using DenseDisparity = DisparityMap;

}  // namespace satstereo
