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

#include "satstereo/rectify/rectifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "satstereo/common/error.hpp"

namespace satstereo::rectify {
namespace {

constexpr double kMaxGroundResidualPx = 0.5;

Eigen::Vector2d uv(const geo::AffineCamera& cam, const geo::GeodeticPoint& p) {
  const geo::Pixel px = cam.project(p);
  return {px.sample, px.line};
}

}  // namespace

RectifyingHomographies estimate_rectifying_homographies(const geo::AffineCamera& left_cam,
                                                        const geo::AffineCamera& right_cam,
                                                        const RectificationParams& params) {
  const auto& box = params.scene_bbox;
  if (params.n_points < 8) throw InvalidArgument("estimate_rectifying_homographies: n_points must be >= 8");
  if (!(box.lat_max > box.lat_min && box.lon_max > box.lon_min)) {
    throw InvalidArgument("estimate_rectifying_homographies: degenerate scene bbox");
  }

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> lat(box.lat_min, box.lat_max);
  std::uniform_real_distribution<double> lon(box.lon_min, box.lon_max);
  const std::size_t n = params.n_points;
  std::vector<Eigen::Vector2d> ua(n), ub(n), mid(n);
  for (std::size_t i = 0; i < n; ++i) {
    const geo::GeodeticPoint g{lat(rng), lon(rng), params.ground_plane_alt};
    ua[i] = uv(left_cam, g);
    ub[i] = uv(right_cam, g);
    mid[i] = 0.5 * (ua[i] + ub[i]);
  }

  // Preliminary maps onto the mean frame, used only to measure the epipolar
  // direction with an elevated probe.
  const Homography ga = fit_homography_dlt(ua, mid);
  const Homography gb = fit_homography_dlt(ub, mid);
  geo::GeodeticPoint probe = box.center();
  probe.alt = params.ground_plane_alt + params.probe_height;
  const Eigen::Vector2d parallax = ga.apply(uv(left_cam, probe)) - gb.apply(uv(right_cam, probe));

  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& m : mid) centroid += m;
  centroid /= static_cast<double>(n);
  Eigen::Matrix2d rot = Eigen::Matrix2d::Identity();
  if (parallax.norm() > 1e-9) {
    rot = Eigen::Rotation2Dd(-std::atan2(parallax.y(), parallax.x())).toRotationMatrix();
  }
  std::vector<Eigen::Vector2d> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = rot * (mid[i] - centroid) + centroid;

  RectifyingHomographies out{fit_homography_dlt(ua, target), fit_homography_dlt(ub, target), 0.0, 0.0,
                             params.seed};
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d ra = out.left.apply(ua[i]);
    const Eigen::Vector2d rb = out.right.apply(ub[i]);
    out.max_ground_residual =
        std::max({out.max_ground_residual, (ra - target[i]).norm(), (rb - target[i]).norm()});
    out.max_ground_vertical_residual = std::max(out.max_ground_vertical_residual, std::abs(ra.y() - rb.y()));
  }
  if (out.max_ground_residual > kMaxGroundResidualPx) {
    throw EstimationFailure("estimate_rectifying_homographies: ground residual above 0.5 px",
                            out.max_ground_residual);
  }
  return out;
}

FramedRectification frame_scene(const RectifyingHomographies& h, const geo::AffineCamera& left_cam,
                                const geo::AffineCamera& right_cam, const RectificationParams& params,
                                double margin) {
  const auto& box = params.scene_bbox;
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (double alt : {box.alt_min, box.alt_max, params.ground_plane_alt}) {
    for (double la : {box.lat_min, box.lat_max}) {
      for (double lo_ : {box.lon_min, box.lon_max}) {
        const geo::GeodeticPoint g{la, lo_, alt};
        for (const Eigen::Vector2d& p : {h.left.apply(uv(left_cam, g)), h.right.apply(uv(right_cam, g))}) {
          lo = lo.cwiseMin(p);
          hi = hi.cwiseMax(p);
        }
      }
    }
  }
  const Eigen::Vector2d shift = Eigen::Vector2d::Constant(margin) - lo.array().floor().matrix();
  const Homography t = Homography::translation(shift.x(), shift.y());
  FramedRectification out{h, 0, 0};
  out.homographies.left = t * h.left;
  out.homographies.right = t * h.right;
  out.cols = static_cast<std::size_t>(std::ceil(hi.x() + shift.x() + margin)) + 1;
  out.rows = static_cast<std::size_t>(std::ceil(hi.y() + shift.y() + margin)) + 1;
  return out;
}

WarpResult warp_bilinear(const ImageF& src, const Homography& h, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw InvalidArgument("warp_bilinear: output dimensions must be positive");
  if (src.empty()) throw InvalidArgument("warp_bilinear: empty source");
  const Eigen::Matrix3d inv = h.inverse().matrix();
  WarpResult out{ImageF(rows, cols, 0.0f), Mask(rows, cols, 0)};
  const double max_x = static_cast<double>(src.cols() - 1);
  const double max_y = static_cast<double>(src.rows() - 1);
  constexpr double kEdgeTol = 1e-9;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const Eigen::Vector3d q = inv * Eigen::Vector3d(static_cast<double>(c), static_cast<double>(r), 1.0);
      double x = q.x() / q.z();
      double y = q.y() / q.z();
      if (!(x >= -kEdgeTol && y >= -kEdgeTol && x <= max_x + kEdgeTol && y <= max_y + kEdgeTol)) continue;
      x = std::clamp(x, 0.0, max_x);
      y = std::clamp(y, 0.0, max_y);
      const auto x0 = static_cast<std::size_t>(x);
      const auto y0 = static_cast<std::size_t>(y);
      const std::size_t x1 = std::min(x0 + 1, src.cols() - 1);
      const std::size_t y1 = std::min(y0 + 1, src.rows() - 1);
      const double fx = x - static_cast<double>(x0);
      const double fy = y - static_cast<double>(y0);
      const double top = (1.0 - fx) * src(y0, x0) + fx * src(y0, x1);
      const double bot = (1.0 - fx) * src(y1, x0) + fx * src(y1, x1);
      out.image(r, c) = static_cast<float>((1.0 - fy) * top + fy * bot);
      out.valid(r, c) = 1;
    }
  }
  return out;
}

RectifiedPair rectify_pair(const ImageF& left_img, const ImageF& right_img, const geo::AffineCamera& left_cam,
                           const geo::AffineCamera& right_cam, const RectificationParams& params, double margin) {
  const auto framed =
      frame_scene(estimate_rectifying_homographies(left_cam, right_cam, params), left_cam, right_cam, params, margin);
  auto wl = warp_bilinear(left_img, framed.homographies.left, framed.rows, framed.cols);
  auto wr = warp_bilinear(right_img, framed.homographies.right, framed.rows, framed.cols);
  return RectifiedPair{std::move(wl.image),
                       std::move(wr.image),
                       std::move(wl.valid),
                       std::move(wr.valid),
                       framed.homographies.left,
                       framed.homographies.right,
                       left_cam,
                       right_cam,
                       params.seed};
}

}  // namespace satstereo::rectify
