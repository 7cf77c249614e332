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
#include <sstream>

#include "satstereo/common/error.hpp"
#include "satstereo/geo/camera.hpp"

using namespace satstereo;
using namespace satstereo::geo;

namespace {

// Exponents (L, P, H) of the RPC00B terms, written out independently of the
// library's monomial routine.
constexpr int kExponents[20][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1},
                                   {2, 0, 0}, {0, 2, 0}, {0, 0, 2}, {1, 1, 1}, {3, 0, 0}, {1, 2, 0}, {1, 0, 2},
                                   {2, 1, 0}, {0, 3, 0}, {0, 1, 2}, {2, 0, 1}, {0, 2, 1}, {0, 0, 3}};

double brute_poly(const RpcCamera::Coefficients& c, double L, double P, double H) {
  double s = 0.0;
  for (int i = 0; i < 20; ++i) {
    s += c[i] * std::pow(L, kExponents[i][0]) * std::pow(P, kExponents[i][1]) * std::pow(H, kExponents[i][2]);
  }
  return s;
}

RpcNormalization jacksonville_norm() {
  RpcNormalization n;
  n.lat_off = 30.32;
  n.lat_scale = 0.05;
  n.lon_off = -81.66;
  n.lon_scale = 0.05;
  n.height_off = 0.0;
  n.height_scale = 500.0;
  n.line_off = 5000.0;
  n.line_scale = 5000.0;
  n.samp_off = 5000.0;
  n.samp_scale = 5000.0;
  return n;
}

// RPC whose numerators are linear in (L, P, H) and denominators are 1.
RpcCamera affine_rpc() {
  RpcCamera cam;
  cam.norm = jacksonville_norm();
  cam.samp_num = {0.01, 0.9, 0.05, 0.08};
  cam.line_num = {-0.02, 0.04, -0.95, 0.03};
  cam.samp_den[0] = 1.0;
  cam.line_den[0] = 1.0;
  return cam;
}

RpcCamera smooth_rpc() {
  RpcCamera cam = affine_rpc();
  cam.samp_num[7] = 1e-4;   // L^2
  cam.samp_num[12] = 2e-4;  // LP^2
  cam.line_num[8] = -1e-4;  // P^2
  cam.line_num[10] = 1e-4;  // PLH
  cam.samp_den[1] = 1e-5;
  cam.line_den[2] = -1e-5;
  return cam;
}

// ~2 km x 2 km x 500 m around the normalization offset.
GeodeticBox city_volume() { return {30.31, 30.328, -81.67, -81.649, 0.0, 500.0}; }

}  // namespace

TEST(RpcProject, IdentityPolynomialReturnsNormalizedLongitude) {
  RpcCamera cam;
  cam.samp_num[1] = 1.0;
  cam.samp_den[0] = 1.0;
  cam.line_num[2] = 1.0;
  cam.line_den[0] = 1.0;
  const Pixel px = rpc_project(cam, {0.25, 0.7, 0.1});
  EXPECT_EQ(px.sample, 0.7);
  EXPECT_EQ(px.line, 0.25);
}

TEST(RpcProject, VanishingDenominatorIsSingular) {
  RpcCamera cam;
  cam.samp_num[0] = 1.0;
  cam.samp_den = {1.0, -2.0};  // 1 - 2L == 0 at L = 0.5
  cam.line_num[0] = 1.0;
  cam.line_den[0] = 1.0;
  EXPECT_THROW(rpc_project(cam, {0.0, 0.5, 0.0}), SingularProjection);
  EXPECT_NO_THROW(rpc_project(cam, {0.0, 0.4, 0.0}));
}

TEST(RpcProject, RejectsPointsFarOutsideValidityVolume) {
  const RpcCamera cam = affine_rpc();
  EXPECT_NO_THROW(rpc_project(cam, {30.32 + 1.4 * 0.05, -81.66, 0.0}));
  EXPECT_THROW(rpc_project(cam, {30.32 + 1.6 * 0.05, -81.66, 0.0}), InvalidArgument);
}

TEST(RpcProject, MatchesBruteForceMonomialSum) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    RpcCamera cam;
    cam.norm = jacksonville_norm();
    for (int i = 0; i < 20; ++i) {
      cam.line_num[i] = coef(rng);
      cam.samp_num[i] = coef(rng);
      cam.line_den[i] = 0.05 * coef(rng);
      cam.samp_den[i] = 0.05 * coef(rng);
    }
    cam.line_den[0] = 1.0;
    cam.samp_den[0] = 1.0;
    const double L = unit(rng), P = unit(rng), Hn = unit(rng);
    const GeodeticPoint p{cam.norm.lat_off + P * cam.norm.lat_scale, cam.norm.lon_off + L * cam.norm.lon_scale,
                          cam.norm.height_off + Hn * cam.norm.height_scale};
    // Use the normalized values the library will see.
    const double Ln = (p.lon - cam.norm.lon_off) / cam.norm.lon_scale;
    const double Pn = (p.lat - cam.norm.lat_off) / cam.norm.lat_scale;
    const double Hh = (p.alt - cam.norm.height_off) / cam.norm.height_scale;
    const double s = brute_poly(cam.samp_num, Ln, Pn, Hh) / brute_poly(cam.samp_den, Ln, Pn, Hh) *
                         cam.norm.samp_scale + cam.norm.samp_off;
    const double l = brute_poly(cam.line_num, Ln, Pn, Hh) / brute_poly(cam.line_den, Ln, Pn, Hh) *
                         cam.norm.line_scale + cam.norm.line_off;
    const Pixel px = rpc_project(cam, p);
    EXPECT_NEAR(px.sample, s, 1e-12 * std::abs(s));
    EXPECT_NEAR(px.line, l, 1e-12 * std::abs(l));
  }
}

TEST(RpcProject, MonomialRoutineMatchesExponentTable) {
  const double L = 0.3, P = -0.7, Hh = 1.1;
  const auto t = rpc_terms(L, P, Hh);
  for (int i = 0; i < 20; ++i) {
    EXPECT_NEAR(t[i], std::pow(L, kExponents[i][0]) * std::pow(P, kExponents[i][1]) * std::pow(Hh, kExponents[i][2]),
                1e-15)
        << i;
  }
}

TEST(RpcFile, RoundTripIsExact) {
  const RpcCamera cam = smooth_rpc();
  std::stringstream ss;
  write_rpc(ss, cam);
  const RpcCamera back = read_rpc(ss);
  EXPECT_EQ(back.samp_num, cam.samp_num);
  EXPECT_EQ(back.line_den, cam.line_den);
  EXPECT_EQ(back.norm.lon_off, cam.norm.lon_off);
  EXPECT_EQ(back.norm.height_scale, cam.norm.height_scale);
}

TEST(RpcFile, AcceptsUnitsAndRejectsMissingKeys) {
  std::stringstream ss;
  write_rpc(ss, affine_rpc());
  std::string text = ss.str();
  const auto pos = text.find("LAT_OFF: ");
  text.insert(text.find('\n', pos), " degrees");
  std::stringstream with_units(text);
  EXPECT_EQ(read_rpc(with_units).norm.lat_off, 30.32);

  std::string missing = ss.str();
  missing.erase(missing.find("SAMP_SCALE"), missing.find('\n', missing.find("SAMP_SCALE")) - missing.find("SAMP_SCALE"));
  std::stringstream bad(missing);
  EXPECT_THROW(read_rpc(bad), FormatError);
}

TEST(AffineFit, RecoversExactlyAffineRpc) {
  const RpcCamera rpc = affine_rpc();
  const auto fit = fit_affine_camera(rpc, city_volume());
  EXPECT_LT(fit.max_residual_px, 1e-9);
  EXPECT_TRUE(fit.height_constrained);
  EXPECT_LT(max_reprojection_error(rpc, fit.camera, city_volume(), 9), 1e-9);
}

TEST(AffineFit, SmoothRpcHeldOutResidualBelowTenthPixel) {
  const RpcCamera rpc = smooth_rpc();
  const auto fit = fit_affine_camera(rpc, city_volume());
  EXPECT_GT(fit.max_residual_px, 1e-6);  // genuinely non-affine
  EXPECT_LT(max_reprojection_error(rpc, fit.camera, city_volume(), 9), 0.1);
  EXPECT_LE(fit.iterations, 20);
}

TEST(AffineFit, FlatVolumeIsFlaggedButSucceeds) {
  GeodeticBox flat = city_volume();
  flat.alt_min = flat.alt_max = 10.0;
  const auto fit = fit_affine_camera(affine_rpc(), flat);
  EXPECT_FALSE(fit.height_constrained);
  EXPECT_LT(fit.max_residual_px, 1e-9);
  // Height column falls back to the center linearization, which is exact here.
  EXPECT_LT(max_reprojection_error(affine_rpc(), fit.camera, city_volume(), 5), 1e-6);
}

TEST(AffineFit, ResidualAboveToleranceCarriesResidual) {
  AffineFitOptions opts;
  opts.tolerance_px = 1e-8;
  try {
    fit_affine_camera(smooth_rpc(), city_volume(), opts);
    FAIL() << "expected FitFailure";
  } catch (const FitFailure& e) {
    EXPECT_GT(e.residual(), 1e-8);
  }
}

TEST(AffineFit, RejectsDegenerateInputs) {
  GeodeticBox bad = city_volume();
  bad.lat_max = bad.lat_min;
  EXPECT_THROW(fit_affine_camera(affine_rpc(), bad), InvalidArgument);
  AffineFitOptions opts;
  opts.grid_per_axis = 3;
  EXPECT_THROW(fit_affine_camera(affine_rpc(), city_volume(), opts), InvalidArgument);
}

TEST(AffineCameraProject, IdentityLikeMatrixReturnsLocalXY) {
  AffineCamera::Matrix m;
  m << 1, 0, 0, 0, 0, 1, 0, 0;
  const GeodeticPoint origin{30.0, -81.0, 0.0};
  const AffineCamera cam(m, origin);
  const GeodeticPoint p{30.001, -80.998, 17.0};
  const Eigen::Vector3d local = cam.frame().to_local(p);
  const Pixel px = affine_project(cam, p);
  EXPECT_NEAR(px.sample, local.x(), 1e-12);
  EXPECT_NEAR(px.line, local.y(), 1e-12);
}

TEST(AffineCameraProject, OriginMapsToTranslationColumn) {
  AffineCamera::Matrix m;
  m << 2, 0.1, 0.3, 120.5, -0.2, -2, 0.4, 88.25;
  const GeodeticPoint origin{30.0, -81.0, 4.0};
  const Pixel px = AffineCamera(m, origin).project(origin);
  EXPECT_EQ(px.sample, 120.5);
  EXPECT_EQ(px.line, 88.25);
}

TEST(AffineCameraProject, LinearInPointsAndAltitude) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    AffineCamera::Matrix m = AffineCamera::Matrix::NullaryExpr([&] { return u(rng); });
    m(0, 0) += 2.0;
    m(1, 1) += 2.0;
    const AffineCamera cam(m, {30.0 + u(rng), -81.0 + u(rng), 0.0});
    const GeodeticPoint p1{30.0 + 0.01 * u(rng), -81.0 + 0.01 * u(rng), 100 * u(rng)};
    const GeodeticPoint p2{30.0 + 0.01 * u(rng), -81.0 + 0.01 * u(rng), 100 * u(rng)};
    const double alpha = 0.5 * (u(rng) + 1.0);
    const GeodeticPoint mix{alpha * p1.lat + (1 - alpha) * p2.lat, alpha * p1.lon + (1 - alpha) * p2.lon,
                            alpha * p1.alt + (1 - alpha) * p2.alt};
    const Pixel a = cam.project(p1), b = cam.project(p2), c = cam.project(mix);
    const double es = alpha * a.sample + (1 - alpha) * b.sample;
    const double el = alpha * a.line + (1 - alpha) * b.line;
    EXPECT_NEAR(c.sample, es, 1e-9 * std::max(1.0, std::abs(es)));
    EXPECT_NEAR(c.line, el, 1e-9 * std::max(1.0, std::abs(el)));
  }
}

TEST(AffineCameraProject, RebasedCameraProjectsIdentically) {
  AffineCamera::Matrix m;
  m << 2, 0.1, 0.3, 120.5, -0.2, -2, 0.4, 88.25;
  const AffineCamera cam(m, {30.0, -81.0, 4.0});
  const AffineCamera moved = cam.rebased({30.02, -80.97, -10.0});
  const GeodeticPoint p{30.013, -80.991, 35.0};
  EXPECT_NEAR(cam.project(p).sample, moved.project(p).sample, 1e-8);
  EXPECT_NEAR(cam.project(p).line, moved.project(p).line, 1e-8);
}

TEST(AffineCameraProject, RankDeficientMatrixRejected) {
  AffineCamera::Matrix m;
  m << 1, 2, 3, 0, 2, 4, 6, 0;
  EXPECT_THROW(AffineCamera(m, {}), InvalidArgument);
}
