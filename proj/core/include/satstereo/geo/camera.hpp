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

#include <array>
#include <filesystem>
#include <iosfwd>
#include <limits>

#include <Eigen/Core>

#include "satstereo/geo/geodetic.hpp"

namespace satstereo::geo {

/// Image position; sample is the column coordinate, line the row coordinate.
struct Pixel {
  double sample = 0.0;
  double line = 0.0;
};

/// Scale/offset normalization of an RPC model (the ten non-polynomial
/// coefficients).
struct RpcNormalization {
  double lat_off = 0.0, lat_scale = 1.0;
  double lon_off = 0.0, lon_scale = 1.0;
  double height_off = 0.0, height_scale = 1.0;
  double line_off = 0.0, line_scale = 1.0;
  double samp_off = 0.0, samp_scale = 1.0;
};

/// Rational polynomial camera. Each polynomial has 20 cubic terms in RPC00B
/// order over normalized (L = lon, P = lat, H = height):
///   1 L P H LP LH PH L^2 P^2 H^2 PLH L^3 LP^2 LH^2 L^2P P^3 PH^2 L^2H P^2H H^3
struct RpcCamera {
  using Coefficients = std::array<double, 20>;

  Coefficients line_num{};
  Coefficients line_den{};
  Coefficients samp_num{};
  Coefficients samp_den{};
  RpcNormalization norm;
};

/// The 20 RPC00B monomials of a normalized point.
RpcCamera::Coefficients rpc_terms(double L, double P, double H) noexcept;

/// Projects a geodetic point. Normalized coordinates must lie within
/// [-1.5, 1.5]; a denominator below 1e-9 in magnitude raises
/// SingularProjection.
Pixel rpc_project(const RpcCamera& cam, const GeodeticPoint& p);

/// Reads/writes the `KEY: value` text form (LINE_NUM_COEFF_1..20, ...,
/// SAMP_OFF). Trailing unit words after a value are ignored on read.
RpcCamera read_rpc(std::istream& in);
RpcCamera read_rpc(const std::filesystem::path& path);
void write_rpc(std::ostream& out, const RpcCamera& cam);
void write_rpc(const std::filesystem::path& path, const RpcCamera& cam);

/// 2x4 affine projection of homogeneous local coordinates (east, north, up, 1)
/// to (sample, line), anchored at a local equirectangular frame.
class AffineCamera {
 public:
  using Matrix = Eigen::Matrix<double, 2, 4>;

  AffineCamera() = default;
  /// Throws InvalidArgument if the left 2x3 block is not rank 2.
  AffineCamera(const Matrix& matrix, const GeodeticPoint& local_origin);

  const Matrix& matrix() const noexcept { return matrix_; }
  const LocalFrame& frame() const noexcept { return frame_; }
  const GeodeticPoint& local_origin() const noexcept { return frame_.origin(); }

  Pixel project(const GeodeticPoint& p) const noexcept;
  Eigen::Vector2d project_local(const Eigen::Vector3d& x) const noexcept;

  /// Same projection expressed in the frame anchored at `origin`.
  AffineCamera rebased(const GeodeticPoint& origin) const;

 private:
  Matrix matrix_ = Matrix::Zero();
  LocalFrame frame_;
};

inline Pixel affine_project(const AffineCamera& cam, const GeodeticPoint& p) noexcept {
  return cam.project(p);
}

struct AffineFitOptions {
  int grid_per_axis = 5;  // >= 4, so at least 64 samples
  int max_iterations = 20;
  double convergence_px = 1e-4;
  double tolerance_px = std::numeric_limits<double>::infinity();
};

struct AffineFit {
  AffineCamera camera;
  double max_residual_px = 0.0;
  int iterations = 0;
  /// False when the volume has no altitude extent; the height column then
  /// comes from the RPC linearization at the volume center.
  bool height_constrained = true;
};

/// Least-squares affine approximation of an RPC over a geodetic volume.
/// Starts from the RPC Jacobian at the volume center and refines with
/// Gauss-Newton steps on the grid reprojection error until the largest
/// reprojection change falls below `convergence_px`.
AffineFit fit_affine_camera(const RpcCamera& cam, const GeodeticBox& volume,
                            const AffineFitOptions& opts = {});

/// Max reprojection difference between an RPC and an affine camera over a
/// regular n x n x n grid of the volume.
double max_reprojection_error(const RpcCamera& rpc, const AffineCamera& affine,
                              const GeodeticBox& volume, int grid_per_axis);

}  // namespace satstereo::geo
