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

#include <span>

#include <Eigen/Core>

namespace satstereo::rectify {

/// Planar projective transform, stored normalized so that h(2,2) == 1.
class Homography {
 public:
  Homography() : h_(Eigen::Matrix3d::Identity()) {}
  /// Throws InvalidArgument if h(2,2) vanishes or |det| <= 1e-12 after
  /// normalization.
  explicit Homography(const Eigen::Matrix3d& h);

  static Homography identity() { return Homography(); }
  static Homography translation(double tx, double ty);

  const Eigen::Matrix3d& matrix() const noexcept { return h_; }
  Eigen::Vector2d apply(const Eigen::Vector2d& p) const noexcept;
  Homography inverse() const;

  /// Composition: (a * b).apply(p) == a.apply(b.apply(p)).
  friend Homography operator*(const Homography& a, const Homography& b) { return Homography(a.h_ * b.h_); }

 private:
  Eigen::Matrix3d h_;
};

/// Direct linear transform with Hartley normalization of both point sets.
/// Requires at least 4 correspondences; throws Degeneracy when either set is
/// (numerically) collinear.
Homography fit_homography_dlt(std::span<const Eigen::Vector2d> src, std::span<const Eigen::Vector2d> dst);

}  // namespace satstereo::rectify
