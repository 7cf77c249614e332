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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "satstereo/common/error.hpp"
#include "satstereo/rectify/rectifier.hpp"
#include "support/synthetic_cameras.hpp"

using namespace satstereo;
using namespace satstereo::rectify;
using satstereo::testing::make_camera;
using satstereo::testing::scene_box;
using satstereo::testing::scene_origin;

namespace {

Eigen::Vector2d rectified(const geo::AffineCamera& cam, const Homography& h, const geo::GeodeticPoint& p) {
  const auto px = cam.project(p);
  return h.apply({px.sample, px.line});
}

RectificationParams params_for(std::uint64_t seed = 7) {
  RectificationParams p;
  p.ground_plane_alt = 0.0;
  p.scene_bbox = scene_box(0.0, 100.0);
  p.n_points = 64;
  p.seed = seed;
  return p;
}

ImageF smooth_image(std::size_t rows, std::size_t cols) {
  ImageF img(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      img(r, c) = static_cast<float>(0.5 + 0.2 * std::sin(0.05 * c) * std::cos(0.04 * r) + 0.001 * c);
  return img;
}

}  // namespace

TEST(Homography, DltRecoversProjectiveMap) {
  Eigen::Matrix3d truth;
  truth << 1.1, 0.05, 12.0, -0.03, 0.95, -4.0, 1e-4, -2e-4, 1.0;
  const Homography h(truth);
  std::vector<Eigen::Vector2d> src, dst;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 500.0);
  for (int i = 0; i < 30; ++i) {
    src.emplace_back(u(rng), u(rng));
    dst.push_back(h.apply(src.back()));
  }
  const Homography est = fit_homography_dlt(src, dst);
  EXPECT_LT((est.matrix() - h.matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Homography, CompositionAndInverse) {
  Eigen::Matrix3d a;
  a << 1.1, 0.05, 12.0, -0.03, 0.95, -4.0, 1e-4, -2e-4, 1.0;
  const Homography h(a), t = Homography::translation(3, -2);
  const Eigen::Vector2d p(17.0, 41.0);
  EXPECT_LT(((t * h).apply(p) - t.apply(h.apply(p))).norm(), 1e-12);
  EXPECT_LT((h.inverse().apply(h.apply(p)) - p).norm(), 1e-9);
  EXPECT_THROW(Homography(Eigen::Matrix3d::Zero()), InvalidArgument);
  Eigen::Matrix3d singular = Eigen::Matrix3d::Ones();
  EXPECT_THROW((Homography(singular)), InvalidArgument);
}

TEST(Rectify, IdenticalCamerasGiveEqualHomographies) {
  const auto cam = make_camera(scene_origin(), 0.5, 0.2, 0.3, 0.1);
  const auto h = estimate_rectifying_homographies(cam, cam, params_for());
  EXPECT_LT((h.left.matrix() - h.right.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((h.left.matrix() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(h.max_ground_vertical_residual, 1e-9);
}

TEST(Rectify, PureHorizontalBaselineIsAlreadyRectified) {
  const auto left = make_camera(scene_origin(), 0.5, 0.0, 0.4, 0.0);
  const auto right = make_camera(scene_origin(), 0.5, 0.0, -0.3, 0.0);
  const auto h = estimate_rectifying_homographies(left, right, params_for());
  EXPECT_LT((h.left.matrix() - h.right.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((h.left.matrix() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  geo::GeodeticPoint roof = scene_origin();
  roof.alt = 50.0;
  const Eigen::Vector2d d = rectified(left, h.left, roof) - rectified(right, h.right, roof);
  EXPECT_NEAR(d.y(), 0.0, 1e-9);
  EXPECT_NEAR(d.x(), 0.7 * 50.0, 1e-9);
}

TEST(Rectify, GeneralPairResiduals) {
  const auto left = make_camera(scene_origin(), 0.5, 0.15, 0.35, 0.12);
  const auto right = make_camera(scene_origin(), 0.45, -0.25, -0.28, -0.05, 280.0, 330.0);
  const auto h = estimate_rectifying_homographies(left, right, params_for());
  EXPECT_LT(h.max_ground_vertical_residual, 0.1);
  std::mt19937_64 rng(4);
  const auto box = scene_box();
  std::uniform_real_distribution<double> lat(box.lat_min, box.lat_max), lon(box.lon_min, box.lon_max);
  for (int i = 0; i < 200; ++i) {
    const geo::GeodeticPoint ground{lat(rng), lon(rng), 0.0};
    const geo::GeodeticPoint high{ground.lat, ground.lon, 100.0};
    const Eigen::Vector2d g = rectified(left, h.left, ground) - rectified(right, h.right, ground);
    const Eigen::Vector2d e = rectified(left, h.left, high) - rectified(right, h.right, high);
    EXPECT_LE(std::abs(g.y()), 0.1);
    EXPECT_LE(std::abs(e.y()), 1.0);
    EXPECT_GT(e.x(), 0.0);  // elevated points have positive disparity
  }
}

TEST(Rectify, VerticalEpipolarInvariantAfterFraming) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ang(-0.5, 0.5), lean(0.1, 0.5), gsd(0.3, 0.6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto left = make_camera(scene_origin(), gsd(rng), ang(rng), lean(rng), 0.3 * ang(rng));
    const auto right = make_camera(scene_origin(), gsd(rng), ang(rng), -lean(rng), 0.3 * ang(rng), 250, 350);
    auto params = params_for(static_cast<std::uint64_t>(trial));
    params.scene_bbox = scene_box(0.0, 500.0);
    const auto framed = frame_scene(estimate_rectifying_homographies(left, right, params), left, right, params);
    const auto box = params.scene_bbox;
    std::uniform_real_distribution<double> lat(box.lat_min, box.lat_max), lon(box.lon_min, box.lon_max),
        alt(0.0, 500.0);
    for (int i = 0; i < 100; ++i) {
      const geo::GeodeticPoint p{lat(rng), lon(rng), alt(rng)};
      const Eigen::Vector2d a = rectified(left, framed.homographies.left, p);
      const Eigen::Vector2d b = rectified(right, framed.homographies.right, p);
      ASSERT_LE(std::abs(a.y() - b.y()), 1.0);
      ASSERT_GE(a.x(), 0.0);
      ASSERT_GE(a.y(), 0.0);
      ASSERT_LT(a.x(), static_cast<double>(framed.cols));
      ASSERT_LT(b.y(), static_cast<double>(framed.rows));
    }
  }
}

TEST(Rectify, PreconditionErrors) {
  const auto cam = make_camera(scene_origin(), 0.5, 0.2, 0.3, 0.1);
  auto p = params_for();
  p.n_points = 7;
  EXPECT_THROW(estimate_rectifying_homographies(cam, cam, p), InvalidArgument);
  p = params_for();
  p.scene_bbox.lon_max = p.scene_bbox.lon_min;
  EXPECT_THROW(estimate_rectifying_homographies(cam, cam, p), InvalidArgument);

  // Ground plane collapses onto a line in this camera's image.
  geo::AffineCamera::Matrix m;
  m << 1, 0, 0, 0, 1, 0, 1, 0;
  const geo::AffineCamera flat(m, scene_origin());
  EXPECT_THROW(estimate_rectifying_homographies(flat, cam, params_for()), Degeneracy);
}

TEST(Warp, IdentityReproducesInput) {
  const ImageF img = smooth_image(20, 30);
  const auto w = warp_bilinear(img, Homography::identity(), 20, 30);
  EXPECT_EQ(w.image, img);
  EXPECT_EQ(count_valid(w.valid), img.size());
}

TEST(Warp, IntegerTranslationShiftsAndMasks) {
  const ImageF img = smooth_image(10, 20);
  const auto w = warp_bilinear(img, Homography::translation(5, 0), 10, 20);
  for (std::size_t r = 0; r < 10; ++r) {
    for (std::size_t c = 0; c < 20; ++c) {
      if (c < 5) {
        EXPECT_EQ(w.valid(r, c), 0);
        EXPECT_EQ(w.image(r, c), 0.0f);
      } else {
        EXPECT_EQ(w.valid(r, c), 1);
        EXPECT_EQ(w.image(r, c), img(r, c - 5));
      }
    }
  }
}

TEST(Warp, HalfPixelShiftAveragesRamp) {
  ImageF ramp(4, 10);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 10; ++c) ramp(r, c) = static_cast<float>(c);
  const auto w = warp_bilinear(ramp, Homography::translation(0.5, 0), 4, 10);
  for (std::size_t c = 1; c < 10; ++c) {
    EXPECT_FLOAT_EQ(w.image(2, c), 0.5f * (ramp(2, c - 1) + ramp(2, c)));
  }
  EXPECT_EQ(w.valid(2, 0), 0);
}

TEST(Warp, CompositionMatchesSingleWarpOnSmoothImage) {
  const ImageF img = smooth_image(60, 80);
  Eigen::Matrix3d a, b;
  a << 1.0, 0.05, 3.2, -0.04, 1.0, 1.7, 0, 0, 1;
  b << 0.98, -0.02, -2.1, 0.03, 1.01, 0.6, 0, 0, 1;
  const Homography h1(a), h2(b);
  const auto once = warp_bilinear(img, h2 * h1, 60, 80);
  const auto first = warp_bilinear(img, h1, 60, 80);
  const auto twice = warp_bilinear(first.image, h2, 60, 80);
  const Homography h2inv = h2.inverse();
  double worst = 0.0;
  for (std::size_t r = 0; r < 60; ++r) {
    for (std::size_t c = 0; c < 80; ++c) {
      if (!once.valid(r, c) || !twice.valid(r, c)) continue;
      // Only pixels whose intermediate bilinear footprint is fully valid.
      const Eigen::Vector2d q = h2inv.apply({double(c), double(r)});
      const auto qc = static_cast<std::ptrdiff_t>(std::floor(q.x()));
      const auto qr = static_cast<std::ptrdiff_t>(std::floor(q.y()));
      bool inside = true;
      for (int dr = 0; dr <= 1; ++dr)
        for (int dc = 0; dc <= 1; ++dc)
          inside = inside && first.valid.contains(qr + dr, qc + dc) && first.valid(qr + dr, qc + dc);
      if (!inside) continue;
      worst = std::max(worst, double(std::abs(once.image(r, c) - twice.image(r, c))));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Warp, ShrinkingOutputNeverAddsValidPixels) {
  const ImageF img = smooth_image(30, 30);
  Eigen::Matrix3d a;
  a << 0.9, 0.1, 4.0, -0.1, 0.9, 2.0, 0, 0, 1;
  const auto big = warp_bilinear(img, Homography(a), 40, 40);
  const auto small = warp_bilinear(img, Homography(a), 25, 33);
  for (std::size_t r = 0; r < 25; ++r)
    for (std::size_t c = 0; c < 33; ++c) EXPECT_LE(small.valid(r, c), big.valid(r, c));
  EXPECT_THROW(warp_bilinear(img, Homography(a), 0, 3), InvalidArgument);
}
