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
#include <vector>

#include "satstereo/common/raster.hpp"
#include "satstereo/dsm/dsm.hpp"
#include "satstereo/geo/camera.hpp"
#include "satstereo/gt/ground_truth.hpp"

namespace satstereo::pipeline {

/// Axis-aligned box building in the local east/north frame of the scene
/// origin (metres).
struct Building {
  double east_min = 0.0, east_max = 0.0;
  double north_min = 0.0, north_max = 0.0;
  double height = 0.0;
};

/// Affine view: in-plane rotation and lean (pixels of image shift per metre
/// of height) on top of a nadir projection with the scene GSD.
struct SyntheticView {
  double angle = 0.0;
  double lean_sample = 0.0;
  double lean_line = 0.0;
};

struct SyntheticSceneSpec {
  geo::GeodeticPoint origin{30.32, -81.66, 0.0};
  double half_extent = 80.0;  ///< ground square is +-half_extent metres around the origin
  std::vector<Building> buildings{{-55.0, -15.0, -45.0, 5.0, 20.0}, {10.0, 50.0, -10.0, 40.0, 50.0}};
  double gsd = 0.35;
  std::vector<SyntheticView> views{{0.02, 0.5, 0.0}, {0.02, -0.5, 0.0}};
  double lidar_cell = 0.5;
  double dsm_cell = 0.5;
  /// Altitude the written config maps to zero disparity. Below the ground,
  /// so ground pixels do not sit on the edge of the disparity range.
  double zero_disparity_alt = -8.0;
  double texture_scale = 1.5;  ///< metres per noise lattice cell
  std::uint64_t seed = 1;
};

/// Piecewise-constant surface height above the origin altitude. Each
/// building's footprint becomes the UTM rectangle spanned by its corners,
/// with edges rounded to multiples of dsm_cell, so every DSM cell is wholly
/// roof or wholly ground.
class SyntheticSurface {
 public:
  explicit SyntheticSurface(const SyntheticSceneSpec& spec);
  double at_utm(double easting, double northing) const noexcept;
  /// Local east/north mapped to UTM by a first-order expansion about the
  /// origin; the error is far below a millimetre over the scene.
  double at_local(double east, double north) const noexcept;
  Eigen::Vector2d local_to_utm(double east, double north) const noexcept;

 private:
  struct Footprint {
    double e0, e1, n0, n1, height;
  };
  std::vector<Footprint> footprints_;
  Eigen::Vector2d origin_utm_;
  Eigen::Matrix2d jacobian_;
};

/// Scene volume: the ground square, from 5 m below the ground to 10 m above
/// the tallest building.
geo::GeodeticBox scene_bbox(const SyntheticSceneSpec& spec);

/// Camera of one view for an image of `rows` x `cols` pixels centred on the
/// scene origin.
geo::AffineCamera view_camera(const SyntheticSceneSpec& spec, const SyntheticView& view, std::size_t rows,
                              std::size_t cols);

/// Image size that holds the whole scene in every view.
std::size_t view_size(const SyntheticSceneSpec& spec);

/// RPC that reproduces `cam` exactly: unit denominators and linear
/// numerators over a normalization that maps `volume` to [-1, 1].
geo::RpcCamera affine_to_rpc(const geo::AffineCamera& cam, const geo::GeodeticBox& volume, std::size_t rows,
                             std::size_t cols);

/// Ray-cast rendering (2x2 supersampled) of a solid value-noise texture
/// shaded by surface orientation. Values lie in [0, 1].
ImageF render_view(const SyntheticSceneSpec& spec, const geo::AffineCamera& cam, std::size_t rows,
                   std::size_t cols);

/// Height field sampled at UTM cell centres over the scene square.
gt::LidarGrid synthetic_lidar(const SyntheticSceneSpec& spec);

/// Grid covering the horizontal extent of `bbox`, anchored on multiples of
/// `cell_size`. The DSM stage and the truth DSM both use it.
dsm::DsmGrid scene_grid(const geo::GeodeticBox& bbox, double cell_size);

/// Truth DSM on the grid covering the scene bbox (the pipeline's DSM grid).
dsm::EsriGrid synthetic_truth_dsm(const SyntheticSceneSpec& spec);

/// Writes view_{k}.pgm, view_{k}.rpc, lidar.pfm (+ sidecar), truth_dsm.asc
/// and a pipeline config (`config.json`) under `dir`. Returns the config
/// path.
std::filesystem::path write_synthetic_scene(const std::filesystem::path& dir, const SyntheticSceneSpec& spec = {});

}  // namespace satstereo::pipeline
