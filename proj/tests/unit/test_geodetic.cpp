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
#include <numbers>
#include <random>

#include "satstereo/common/error.hpp"
#include <Eigen/Geometry>

#include "satstereo/geo/geodetic.hpp"

using namespace satstereo;
using namespace satstereo::geo;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Independent inverse transverse Mercator: the USGS footpoint-latitude series
// (Snyder, Map Projections - A Working Manual, eqs. 3-26, 8-17 .. 8-25).
GeodeticPoint snyder_inverse(const UtmPoint& p) {
  const double a = wgs84::kSemiMajor;
  const double e2 = wgs84::kEccentricitySq;
  const double ep2 = e2 / (1.0 - e2);
  const double k0 = 0.9996;
  const double x = p.easting - 500000.0;
  const double y = p.hemisphere == Hemisphere::south ? p.northing - 1e7 : p.northing;
  const double M = y / k0;
  const double mu = M / (a * (1 - e2 / 4 - 3 * e2 * e2 / 64 - 5 * e2 * e2 * e2 / 256));
  const double e1 = (1 - std::sqrt(1 - e2)) / (1 + std::sqrt(1 - e2));
  const double phi1 = mu + (3 * e1 / 2 - 27 * std::pow(e1, 3) / 32) * std::sin(2 * mu) +
                      (21 * e1 * e1 / 16 - 55 * std::pow(e1, 4) / 32) * std::sin(4 * mu) +
                      (151 * std::pow(e1, 3) / 96) * std::sin(6 * mu) +
                      (1097 * std::pow(e1, 4) / 512) * std::sin(8 * mu);
  const double s1 = std::sin(phi1), c1 = std::cos(phi1), t1 = std::tan(phi1);
  const double C1 = ep2 * c1 * c1;
  const double T1 = t1 * t1;
  const double N1 = a / std::sqrt(1 - e2 * s1 * s1);
  const double R1 = a * (1 - e2) / std::pow(1 - e2 * s1 * s1, 1.5);
  const double D = x / (N1 * k0);
  const double lat = phi1 - (N1 * t1 / R1) *
                                (D * D / 2 - (5 + 3 * T1 + 10 * C1 - 4 * C1 * C1 - 9 * ep2) * std::pow(D, 4) / 24 +
                                 (61 + 90 * T1 + 298 * C1 + 45 * T1 * T1 - 252 * ep2 - 3 * C1 * C1) *
                                     std::pow(D, 6) / 720);
  const double lon = (D - (1 + 2 * T1 + C1) * std::pow(D, 3) / 6 +
                      (5 - 2 * C1 + 28 * T1 - 3 * C1 * C1 + 8 * ep2 + 24 * T1 * T1) * std::pow(D, 5) / 120) /
                     c1;
  return {lat / kDeg, central_meridian(p.zone) + lon / kDeg, 0.0};
}

double ground_distance_m(const GeodeticPoint& a, const GeodeticPoint& b) {
  const double dn = (a.lat - b.lat) * meridional_radius(a.lat) * kDeg;
  const double de = (a.lon - b.lon) * prime_vertical_radius(a.lat) * std::cos(a.lat * kDeg) * kDeg;
  return std::hypot(dn, de);
}

}  // namespace

TEST(UtmToWgs84, CentralMeridianOnEquator) {
  const auto p17 = utm_to_wgs84({500000.0, 0.0, 17, Hemisphere::north});
  EXPECT_NEAR(p17.lat, 0.0, 1e-12);
  EXPECT_NEAR(p17.lon, -81.0, 1e-12);
  const auto p31 = utm_to_wgs84({500000.0, 0.0, 31, Hemisphere::north});
  EXPECT_NEAR(p31.lat, 0.0, 1e-12);
  EXPECT_NEAR(p31.lon, 3.0, 1e-12);
}

TEST(UtmToWgs84, CarriesAltitude) {
  EXPECT_EQ(utm_to_wgs84({430000.0, 3350000.0, 17, Hemisphere::north}, 12.5).alt, 12.5);
}

TEST(UtmToWgs84, RejectsBadInput) {
  EXPECT_THROW(utm_to_wgs84({500000.0, 0.0, 0, Hemisphere::north}), InvalidArgument);
  EXPECT_THROW(utm_to_wgs84({500000.0, 0.0, 61, Hemisphere::north}), InvalidArgument);
  EXPECT_THROW(utm_to_wgs84({0.0, 100.0, 17, Hemisphere::north}), InvalidArgument);
  EXPECT_THROW(utm_to_wgs84({1e6, 100.0, 17, Hemisphere::north}), InvalidArgument);
  EXPECT_THROW(utm_to_wgs84({500000.0, -1.0, 17, Hemisphere::north}), InvalidArgument);
  EXPECT_THROW(utm_to_wgs84({500000.0, 1e7, 17, Hemisphere::south}), InvalidArgument);
}

TEST(UtmToWgs84, AgreesWithSnyderSeries) {
  std::mt19937_64 rng(17);
  // The D^6-truncated oracle itself drifts past 1 mm beyond ~180 km from the
  // central meridian, so compare within +-150 km.
  std::uniform_real_distribution<double> east(350000.0, 650000.0);
  std::uniform_real_distribution<double> north(0.0, 7000000.0);
  std::uniform_int_distribution<int> zone(1, 60);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const UtmPoint p{east(rng), north(rng), zone(rng), i % 2 ? Hemisphere::north : Hemisphere::south};
    UtmPoint q = p;
    if (q.hemisphere == Hemisphere::south) q.northing = 1e7 - p.northing;
    const auto ours = utm_to_wgs84(q);
    auto ref = snyder_inverse(q);
    if (ref.lon >= 180.0) ref.lon -= 360.0;
    if (ref.lon < -180.0) ref.lon += 360.0;
    worst = std::max(worst, ground_distance_m(ours, ref));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(UtmToWgs84, ForwardRoundTripBelowMillimetre) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> east(166000.0, 834000.0);
  std::uniform_real_distribution<double> north(0.0, 9300000.0);
  std::uniform_int_distribution<int> zone(1, 60);
  for (int i = 0; i < 1000; ++i) {
    const UtmPoint p{east(rng), north(rng), zone(rng), i % 3 ? Hemisphere::north : Hemisphere::south};
    const auto g = utm_to_wgs84(p);
    ASSERT_TRUE(is_valid(g));
    const auto back = wgs84_to_utm(g, p.zone, p.hemisphere);
    ASSERT_LT(std::hypot(back.easting - p.easting, back.northing - p.northing), 1e-3) << i;
  }
}

TEST(LocalFrame, AffineChangeOfFrameIsExact) {
  const LocalFrame a({30.3, -81.6, 5.0});
  const LocalFrame b({30.31, -81.59, -2.0});
  const GeodeticPoint p{30.305, -81.602, 40.0};
  const Eigen::Vector4d xb = b.to_local(p).homogeneous();
  const Eigen::Vector3d xa = (a.transform_from(b) * xb).head<3>();
  EXPECT_LT((xa - a.to_local(p)).norm(), 1e-9);
  const auto back = a.to_geodetic(a.to_local(p));
  EXPECT_NEAR(back.lat, p.lat, 1e-12);
  EXPECT_NEAR(back.lon, p.lon, 1e-12);
  EXPECT_NEAR(back.alt, p.alt, 1e-12);
}
