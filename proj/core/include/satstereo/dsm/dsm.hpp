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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "satstereo/common/disparity.hpp"
#include "satstereo/common/raster.hpp"
#include "satstereo/geo/geodetic.hpp"
#include "satstereo/rectify/rectifier.hpp"

namespace satstereo::dsm {

struct Triangulation {
  std::vector<geo::GeodeticPoint> points;
  std::size_t skipped = 0;  ///< valid pixels without a well-posed solution
};

/// Maps each valid disparity back through both homographies and solves the
/// 4x3 least-squares system of the two affine cameras. When the stacked
/// camera matrix is rank deficient every valid pixel is skipped.
Triangulation triangulate_pair(const DisparityMap& disp, const rectify::PairGeometry& geom);

/// North-up UTM raster. `origin` is the upper-left corner of cell (0,0).
struct DsmGrid {
  geo::UtmPoint origin;
  double cell_size = 0.5;
  std::size_t rows = 0;
  std::size_t cols = 0;

  /// Smallest grid anchored on multiples of cell_size that covers `points`.
  static DsmGrid covering(std::span<const geo::GeodeticPoint> points, double cell_size);
  /// Cell containing (easting, northing), or false when outside.
  bool locate(double easting, double northing, std::size_t& row, std::size_t& col) const noexcept;
  geo::UtmPoint cell_center(std::size_t row, std::size_t col) const noexcept;

  friend bool operator==(const DsmGrid&, const DsmGrid&) = default;
};

struct PairwiseDsm {
  DsmGrid grid;
  ImageF elevations;  ///< NaN where no sample fell
  Raster<std::uint32_t> counts;
  std::string pair_id;
};

struct FusedDsm {
  DsmGrid grid;
  ImageF elevations;
  Raster<std::uint32_t> support;  ///< samples in the selected bin
  double bin = 0.5;
};

/// Maximum elevation per cell. Points outside the grid are ignored.
PairwiseDsm rasterize_dsm(std::span<const geo::GeodeticPoint> points, const DsmGrid& grid,
                          const std::string& pair_id = {});

/// Per cell: bins floor(z / bin), picks the most populated (lowest on ties)
/// and returns the median of its samples. All inputs must share one grid.
FusedDsm fuse_dsms(std::span<const PairwiseDsm> dsms, double bin = 0.5);

/// Mode-bin median of one sample set; NaN for an empty set.
double fuse_samples(std::vector<double> samples, double bin, std::uint32_t* support = nullptr);

/// ESRI ASCII grid with NODATA_value -9999.
void write_esri_ascii(const std::filesystem::path& path, const DsmGrid& grid, const ImageF& elevations);
struct EsriGrid {
  DsmGrid grid;
  ImageF elevations;
};
/// Zone and hemisphere are not stored in the format and must be supplied.
EsriGrid read_esri_ascii(const std::filesystem::path& path, int zone, geo::Hemisphere hemisphere);

/// `easting northing altitude` per line.
void write_xyz(const std::filesystem::path& path, std::span<const geo::GeodeticPoint> points, int zone,
               geo::Hemisphere hemisphere);

}  // namespace satstereo::dsm
