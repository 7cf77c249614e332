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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "satstereo/common/disparity.hpp"
#include "satstereo/common/raster.hpp"

namespace satstereo::dataset {

struct StereoTile {
  ImageF left;
  ImageF right;
  DisparityMap gt;
  std::size_t row = 0;  ///< offset of the tile in the scene
  std::size_t col = 0;
  int shift_applied = 0;
  bool flipped = false;

  double density() const { return gt.density(); }
};

struct TilingParams {
  std::size_t tile_rows = 256;
  std::size_t tile_cols = 512;
  std::size_t step = 64;
  double min_density = 0.40;
};

/// Number of window positions before density filtering.
std::size_t tile_count(std::size_t scene_rows, std::size_t scene_cols, const TilingParams& p);

/// Slides a window over the scene in row-major order and keeps tiles whose
/// gt density is at least `min_density`. Throws InvalidArgument if the scene
/// is smaller than one tile or the inputs differ in shape.
std::vector<StereoTile> tile_scene(const ImageF& left, const ImageF& right, const DisparityMap& gt,
                                   const TilingParams& p = {});

/// Makes every valid disparity non-negative. Small negative minima are
/// removed by translating the right image by ceil(|min|) pixels; otherwise the
/// views are swapped, disparities negated and re-indexed to the new reference
/// view, then checked again. Returns nullopt when the tile cannot be fixed.
std::optional<StereoTile> canonicalize_pair(const StereoTile& tile, double shift_limit = 10.0);

/// (img - mean) / max(std, 1e-6), statistics in double precision.
ImageF normalize_image(const ImageF& img);

/// One line of the JSONL tile manifest.
struct TileRecord {
  std::string scene;
  std::size_t row = 0;
  std::size_t col = 0;
  int shift_applied = 0;
  bool flipped = false;
  double density = 0.0;
  std::string gt_kind;  ///< "sparse" or "dense"
  std::filesystem::path left, right, gt;
};

/// Writes tile rasters under `dir` and appends one record per tile to
/// `dir/tiles.jsonl`.
std::vector<TileRecord> write_tiles(const std::filesystem::path& dir, const std::string& scene,
                                    const std::string& gt_kind, const std::vector<StereoTile>& tiles);
std::vector<TileRecord> read_manifest(const std::filesystem::path& manifest);
StereoTile load_tile(const TileRecord& rec);

}  // namespace satstereo::dataset
