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

#include "satstereo/common/raster.hpp"
#include "satstereo/geo/camera.hpp"
#include "satstereo/rectify/homography.hpp"

namespace satstereo::rectify {

struct RectificationParams {
  double ground_plane_alt = 0.0;
  /// Horizontal scene extent. The altitude range is used only when framing
  /// the rectified images (see frame_scene).
  geo::GeodeticBox scene_bbox;
  std::size_t n_points = 64;
  std::uint64_t seed = 0;
  /// Height above the ground plane of the probe that fixes the epipolar
  /// direction of the shared frame.
  double probe_height = 100.0;
};

struct RectifyingHomographies {
  Homography left;
  Homography right;
  /// Largest |y_left - y_right| over the ground samples after rectification.
  double max_ground_vertical_residual = 0.0;
  /// Largest distance between a rectified ground sample and its target.
  double max_ground_residual = 0.0;
  std::uint64_t seed = 0;
};

/// Samples `n_points` random ground-plane points, projects them into both
/// cameras and fits one homography per image onto a shared frame: the mean of
/// the two projections, rotated so that the parallax of an elevated probe
/// point is along +x (so points above the ground plane get positive
/// disparity x_left - x_right).
///
/// Throws InvalidArgument for n_points < 8 or a degenerate bbox, Degeneracy
/// for collinear samples and EstimationFailure when a ground residual exceeds
/// 0.5 px.
RectifyingHomographies estimate_rectifying_homographies(const geo::AffineCamera& left_cam,
                                                        const geo::AffineCamera& right_cam,
                                                        const RectificationParams& params);

struct FramedRectification {
  RectifyingHomographies homographies;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Prepends a common translation to both homographies so the projection of
/// the scene box (all eight corners, plus the ground plane) lands inside
/// [margin, cols - margin) x [margin, rows - margin). A shared translation
/// leaves rectification and disparity unchanged.
FramedRectification frame_scene(const RectifyingHomographies& h, const geo::AffineCamera& left_cam,
                                const geo::AffineCamera& right_cam, const RectificationParams& params,
                                double margin = 4.0);

struct WarpResult {
  ImageF image;
  Mask valid;
};

/// Inverse-mapping warp: output pixel (x, y) samples the source at
/// h^-1 (x, y, 1) with bilinear interpolation. Samples outside the source get
/// value 0 and mask 0.
WarpResult warp_bilinear(const ImageF& src, const Homography& h, std::size_t rows, std::size_t cols);

/// Cameras and rectifying homographies of one pair, enough to map world
/// points into either rectified image and back.
struct PairGeometry {
  geo::AffineCamera camera_a;
  geo::AffineCamera camera_b;
  Homography h_a;
  Homography h_b;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Two images warped into a common epipolar-rectified frame.
struct RectifiedPair {
  ImageF left;
  ImageF right;
  Mask left_valid;
  Mask right_valid;
  Homography h_left;
  Homography h_right;
  geo::AffineCamera left_camera;
  geo::AffineCamera right_camera;
  std::uint64_t seed = 0;

  std::size_t rows() const noexcept { return left.rows(); }
  std::size_t cols() const noexcept { return left.cols(); }
  PairGeometry geometry() const { return {left_camera, right_camera, h_left, h_right, rows(), cols()}; }
};

/// Estimate, frame and warp in one call.
RectifiedPair rectify_pair(const ImageF& left_img, const ImageF& right_img, const geo::AffineCamera& left_cam,
                           const geo::AffineCamera& right_cam, const RectificationParams& params,
                           double margin = 4.0);

}  // namespace satstereo::rectify
