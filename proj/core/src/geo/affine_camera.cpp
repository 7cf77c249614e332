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

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "satstereo/common/error.hpp"
#include "satstereo/geo/camera.hpp"

namespace satstereo::geo {

AffineCamera::AffineCamera(const Matrix& matrix, const GeodeticPoint& local_origin)
    : matrix_(matrix), frame_(local_origin) {
  if (!matrix_.allFinite()) throw InvalidArgument("AffineCamera: non-finite matrix");
  Eigen::JacobiSVD<Eigen::Matrix<double, 2, 3>> svd(matrix_.leftCols<3>());
  const auto sv = svd.singularValues();
  if (!(sv(1) > 1e-12 * std::max(1.0, sv(0)))) {
    throw InvalidArgument("AffineCamera: left 2x3 block is rank deficient");
  }
}

Eigen::Vector2d AffineCamera::project_local(const Eigen::Vector3d& x) const noexcept {
  return matrix_.leftCols<3>() * x + matrix_.col(3);
}

Pixel AffineCamera::project(const GeodeticPoint& p) const noexcept {
  const Eigen::Vector2d uv = project_local(frame_.to_local(p));
  return {uv.x(), uv.y()};
}

AffineCamera AffineCamera::rebased(const GeodeticPoint& origin) const {
  const LocalFrame target(origin);
  const Eigen::Matrix4d to_ours = frame_.transform_from(target);
  return AffineCamera(matrix_ * to_ours, origin);
}

namespace {

std::vector<GeodeticPoint> grid_points(const GeodeticBox& v, int n) {
  std::vector<GeodeticPoint> pts;
  pts.reserve(static_cast<std::size_t>(n * n * n));
  auto lerp = [n](double a, double b, int i) { return a + (b - a) * i / (n - 1); };
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        pts.push_back({lerp(v.lat_min, v.lat_max, j), lerp(v.lon_min, v.lon_max, i),
                       lerp(v.alt_min, v.alt_max, k)});
  return pts;
}

Eigen::Vector2d rpc_uv(const RpcCamera& cam, const GeodeticPoint& p) {
  const Pixel px = rpc_project(cam, p);
  return {px.sample, px.line};
}

}  // namespace

double max_reprojection_error(const RpcCamera& rpc, const AffineCamera& affine, const GeodeticBox& volume,
                              int grid_per_axis) {
  double worst = 0.0;
  for (const auto& p : grid_points(volume, grid_per_axis)) {
    const Pixel a = affine.project(p);
    const Eigen::Vector2d r = rpc_uv(rpc, p) - Eigen::Vector2d(a.sample, a.line);
    worst = std::max(worst, r.norm());
  }
  return worst;
}

AffineFit fit_affine_camera(const RpcCamera& cam, const GeodeticBox& volume, const AffineFitOptions& opts) {
  if (opts.grid_per_axis < 4) throw InvalidArgument("fit_affine_camera: grid_per_axis must be >= 4");
  if (!(volume.lat_max > volume.lat_min && volume.lon_max > volume.lon_min && volume.alt_max >= volume.alt_min)) {
    throw InvalidArgument("fit_affine_camera: degenerate volume");
  }
  const GeodeticPoint center = volume.center();
  const LocalFrame frame(center);
  const bool flat = volume.alt_max - volume.alt_min < 1e-9;

  const auto pts = grid_points(volume, opts.grid_per_axis);
  const auto n_obs = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd X(n_obs, 4);
  Eigen::MatrixXd obs(n_obs, 2);
  for (Eigen::Index i = 0; i < n_obs; ++i) {
    X.row(i).head<3>() = frame.to_local(pts[static_cast<std::size_t>(i)]).transpose();
    X(i, 3) = 1.0;
    obs.row(i) = rpc_uv(cam, pts[static_cast<std::size_t>(i)]).transpose();
  }

  // Linearization about the center: central differences with a 1 m step.
  AffineCamera::Matrix m = AffineCamera::Matrix::Zero();
  const Eigen::Vector2d c0 = rpc_uv(cam, center);
  for (int axis = 0; axis < 3; ++axis) {
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    d(axis) = 1.0;
    m.col(axis) = (rpc_uv(cam, frame.to_geodetic(d)) - rpc_uv(cam, frame.to_geodetic(-d))) / 2.0;
  }
  m.col(3) = c0;

  // Free columns of the update; the height column is pinned for flat volumes.
  std::vector<int> free_cols = flat ? std::vector<int>{0, 1, 3} : std::vector<int>{0, 1, 2, 3};
  const auto n_free = static_cast<Eigen::Index>(free_cols.size());
  Eigen::MatrixXd Xf(n_obs, n_free);
  Eigen::VectorXd col_scale(n_free);
  for (Eigen::Index j = 0; j < n_free; ++j) {
    Xf.col(j) = X.col(free_cols[static_cast<std::size_t>(j)]);
    const double s = Xf.col(j).cwiseAbs().maxCoeff();
    col_scale(j) = s > 0.0 ? 1.0 / s : 1.0;
    Xf.col(j) *= col_scale(j);
  }
  const Eigen::MatrixXd normal = Xf.transpose() * Xf;
  const Eigen::LDLT<Eigen::MatrixXd> solver(normal);

  AffineFit fit;
  fit.height_constrained = !flat;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Eigen::MatrixXd resid = obs - X * m.transpose();
    const Eigen::MatrixXd step_scaled = solver.solve(Xf.transpose() * resid);  // n_free x 2
    AffineCamera::Matrix delta = AffineCamera::Matrix::Zero();
    for (Eigen::Index j = 0; j < n_free; ++j) {
      delta.col(free_cols[static_cast<std::size_t>(j)]) = step_scaled.row(j).transpose() * col_scale(j);
    }
    m += delta;
    fit.iterations = it + 1;
    const double change = (X * delta.transpose()).rowwise().norm().maxCoeff();
    if (change < opts.convergence_px) break;
  }

  fit.max_residual_px = (obs - X * m.transpose()).rowwise().norm().maxCoeff();
  if (fit.max_residual_px > opts.tolerance_px) {
    throw FitFailure("fit_affine_camera: residual above tolerance", fit.max_residual_px);
  }
  fit.camera = AffineCamera(m, center);
  return fit;
}

}  // namespace satstereo::geo
