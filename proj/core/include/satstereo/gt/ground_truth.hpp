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

#include <filesystem>
#include <limits>

#include "satstereo/common/disparity.hpp"
#include "satstereo/common/raster.hpp"
#include "satstereo/geo/camera.hpp"
#include "satstereo/geo/geodetic.hpp"
#include "satstereo/rectify/rectifier.hpp"

namespace satstereo::gt {

/// Gridded LiDAR elevations. Rows run south, columns east; `origin` is the
/// center of cell (0,0).
struct LidarGrid {
  ImageF elevations;
  geo::UtmPoint origin;
  double cell_size = 0.5;
  float nodata = std::numeric_limits<float>::quiet_NaN();

  bool is_valid(std::size_t r, std::size_t c) const noexcept;
  geo::UtmPoint cell_center(std::size_t r, std::size_t c) const noexcept;
  /// Throws InvalidArgument on cell_size <= 0 or non-finite data cells.
  void validate() const;
};

/// PFM raster plus JSON sidecar at `<path>.json`.
LidarGrid read_lidar(const std::filesystem::path& pfm_path);
void write_lidar(const std::filesystem::path& pfm_path, const LidarGrid& grid);

/// Disparity as PFM (invalid pixels NaN) with validity mask at `<path>.valid.pgm`.
void write_disparity(const std::filesystem::path& pfm_path, const DisparityMap& d);
DisparityMap read_disparity(const std::filesystem::path& pfm_path);

struct SparseBuild {
  SparseDisparity disparity;
  /// Altitude of the point kept at each valid pixel (NaN elsewhere).
  ImageF altitude;
};

/// Projects every valid LiDAR cell into both rectified images and stores
/// x_a - x_b at the rounded position in image A. Highest altitude wins on
/// collisions. Throws EmptyResult if nothing lands inside the image.
SparseBuild build_sparse_disparity(const LidarGrid& lidar, const rectify::PairGeometry& geom);

/// Invalidates valid pixels lower than the (2r+1)^2 max-filtered altitude by
/// more than `tolerance`. Throws InvalidArgument for radius < 1.
SparseDisparity remove_bleedthrough(const SparseDisparity& sp, const ImageF& altitude, double tolerance = 1.0,
                                    int radius = 2);

/// Piecewise-linear interpolation over the Delaunay triangulation of valid
/// pixels. Pixels outside the convex hull stay invalid; valid inputs are
/// copied unchanged. Throws Degeneracy with < 3 non-collinear valid pixels.
DenseDisparity densify_disparity(const SparseDisparity& sp);

}  // namespace satstereo::gt
