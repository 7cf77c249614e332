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

#include "satstereo/rectify/homography.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "satstereo/common/error.hpp"

namespace satstereo::rectify {

Homography::Homography(const Eigen::Matrix3d& h) {
  if (!h.allFinite() || std::abs(h(2, 2)) < 1e-300) {
    throw InvalidArgument("Homography: cannot normalize (h22 == 0 or non-finite)");
  }
  h_ = h / h(2, 2);
  if (!(std::abs(h_.determinant()) > 1e-12)) throw InvalidArgument("Homography: singular matrix");
}

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h(0, 2) = tx;
  h(1, 2) = ty;
  return Homography(h);
}

Eigen::Vector2d Homography::apply(const Eigen::Vector2d& p) const noexcept {
  const Eigen::Vector3d q = h_ * p.homogeneous();
  return q.head<2>() / q.z();
}

Homography Homography::inverse() const { return Homography(h_.inverse()); }

namespace {

// Similarity moving the centroid to the origin with mean distance sqrt(2).
Eigen::Matrix3d hartley_normalizer(std::span<const Eigen::Vector2d> pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  if (!(dist > 0.0)) throw Degeneracy("fit_homography_dlt: coincident points");
  const double s = std::sqrt(2.0) / dist;
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 0) = t(1, 1) = s;
  t(0, 2) = -s * mean.x();
  t(1, 2) = -s * mean.y();
  return t;
}

void require_non_collinear(std::span<const Eigen::Vector2d> pts, const Eigen::Matrix3d& norm) {
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector2d q = (norm * p.homogeneous()).head<2>();
    cov += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  if (es.eigenvalues()(0) < 1e-10 * es.eigenvalues()(1)) {
    throw Degeneracy("fit_homography_dlt: collinear points");
  }
}

}  // namespace

Homography fit_homography_dlt(std::span<const Eigen::Vector2d> src, std::span<const Eigen::Vector2d> dst) {
  if (src.size() != dst.size()) throw InvalidArgument("fit_homography_dlt: size mismatch");
  if (src.size() < 4) throw InvalidArgument("fit_homography_dlt: need at least 4 correspondences");
  const Eigen::Matrix3d ts = hartley_normalizer(src);
  const Eigen::Matrix3d td = hartley_normalizer(dst);
  require_non_collinear(src, ts);
  require_non_collinear(dst, td);

  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d p = ts * src[static_cast<std::size_t>(i)].homogeneous();
    const Eigen::Vector3d q = td * dst[static_cast<std::size_t>(i)].homogeneous();
    a.row(2 * i) << 0, 0, 0, -q.z() * p.transpose(), q.y() * p.transpose();
    a.row(2 * i + 1) << q.z() * p.transpose(), 0, 0, 0, -q.x() * p.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography(td.inverse() * hn * ts);
}

}  // namespace satstereo::rectify
