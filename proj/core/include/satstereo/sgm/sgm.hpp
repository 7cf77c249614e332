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
#include <cstdint>
#include <vector>

#include "satstereo/common/disparity.hpp"
#include "satstereo/common/raster.hpp"

namespace satstereo::sgm {

struct SgmParams {
  float p1 = 10.0f;
  float p2 = 120.0f;
  int paths = 8;  ///< 4 or 8
  int census_window = 5;
  int max_disparity = 64;  ///< candidates 0 .. max_disparity - 1
  bool subpixel = true;
  bool lr_check = true;
  float lr_tolerance = 1.0f;
  /// Invalidate when the runner-up (outside d +- 1) is within this fraction
  /// of the best aggregated cost; 0 disables.
  float uniqueness = 0.0f;
  /// Connected regions (4-neighbour, steps <= speckle_range) smaller than
  /// speckle_size pixels are invalidated; 0 disables.
  int speckle_size = 0;
  float speckle_range = 1.0f;

  /// Throws InvalidArgument unless p2 >= p1 >= 0, paths in {4, 8}, odd
  /// window <= 7, max_disparity >= 1, uniqueness in [0, 1), speckle_size >= 0
  /// and speckle_range >= 0.
  void validate() const;
};

/// Matching costs indexed (d, y, x); stored pixel-major so that the D costs
/// of one pixel are contiguous.
class CostVolume {
 public:
  CostVolume() = default;
  CostVolume(std::size_t disparities, std::size_t rows, std::size_t cols, float fill = 0.0f)
      : d_(disparities), h_(rows), w_(cols), data_(disparities * rows * cols, fill) {}

  std::size_t disparities() const noexcept { return d_; }
  std::size_t rows() const noexcept { return h_; }
  std::size_t cols() const noexcept { return w_; }

  float& at(std::size_t d, std::size_t y, std::size_t x) noexcept { return data_[(y * w_ + x) * d_ + d]; }
  float at(std::size_t d, std::size_t y, std::size_t x) const noexcept { return data_[(y * w_ + x) * d_ + d]; }
  float* pixel(std::size_t y, std::size_t x) noexcept { return &data_[(y * w_ + x) * d_]; }
  const float* pixel(std::size_t y, std::size_t x) const noexcept { return &data_[(y * w_ + x) * d_]; }

  friend bool operator==(const CostVolume&, const CostVolume&) = default;

 private:
  std::size_t d_ = 0, h_ = 0, w_ = 0;
  std::vector<float> data_;
};

/// Bit k is set when the k-th window neighbour (row-major, center skipped)
/// is darker than the center. Borders are clamped.
Raster<std::uint64_t> census_transform(const ImageF& img, int window);

/// Hamming distance between left(y, x) and right(y, x - d); columns with
/// x - d < 0 cost the full bit count.
CostVolume census_cost(const Raster<std::uint64_t>& left, const Raster<std::uint64_t>& right, int max_disparity,
                       int window);

/// Sum over paths of L_r(p,d) = C(p,d) + min(L_r(p-r,d), L_r(p-r,d+-1) + P1,
/// min_k L_r(p-r,k) + P2) - min_k L_r(p-r,k).
CostVolume sgm_aggregate(const CostVolume& costs, const SgmParams& params);

/// Argmin over d with optional parabola refinement at interior minima.
DisparityMap wta_disparity(const CostVolume& aggregated, bool subpixel = true);

/// Right-view disparity from the left-referenced volume: cost_R(x, d) =
/// cost_L(x + d, d).
DisparityMap wta_disparity_right(const CostVolume& aggregated, bool subpixel = true);

/// Invalidates left pixels with |d_L(x) - d_R(round(x - d_L(x)))| > tolerance.
DisparityMap left_right_check(const DisparityMap& left, const DisparityMap& right, float tolerance = 1.0f);

/// Invalidates pixels whose best aggregated cost is not at least `ratio`
/// below the best cost outside the neighbouring disparities.
void uniqueness_check(DisparityMap& disp, const CostVolume& aggregated, float ratio);

/// Invalidates connected regions of valid pixels smaller than max_size;
/// neighbours join a region when their disparities differ by <= max_diff.
void remove_speckles(DisparityMap& disp, int max_size, float max_diff);

/// Census, aggregation, WTA, optional uniqueness and left-right checks and
/// speckle removal in one call.
DisparityMap sgm_disparity(const ImageF& left, const ImageF& right, const SgmParams& params = {});

}  // namespace satstereo::sgm
