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

#include "satstereo/geo/geodetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "satstereo/common/error.hpp"

namespace satstereo::geo {
namespace {

constexpr double kScale = 0.9996;
constexpr double kFalseEasting = 500000.0;
constexpr double kFalseNorthingSouth = 10000000.0;
constexpr double kDeg = std::numbers::pi / 180.0;

struct KruegerSeries {
  double rectifying_radius;  // A
  std::array<double, 6> alpha;
  std::array<double, 6> beta;
  double e;
};

KruegerSeries make_series() {
  const double n = wgs84::kFlattening / (2.0 - wgs84::kFlattening);
  const double n2 = n * n, n3 = n2 * n, n4 = n3 * n, n5 = n4 * n, n6 = n5 * n;
  KruegerSeries s{};
  s.rectifying_radius = wgs84::kSemiMajor / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
  s.alpha = {n / 2 - 2 * n2 / 3 + 5 * n3 / 16 + 41 * n4 / 180 - 127 * n5 / 288 + 7891 * n6 / 37800,
             13 * n2 / 48 - 3 * n3 / 5 + 557 * n4 / 1440 + 281 * n5 / 630 - 1983433 * n6 / 1935360,
             61 * n3 / 240 - 103 * n4 / 140 + 15061 * n5 / 26880 + 167603 * n6 / 181440,
             49561 * n4 / 161280 - 179 * n5 / 168 + 6601661 * n6 / 7257600,
             34729 * n5 / 80640 - 3418889 * n6 / 1995840,
             212378941 * n6 / 319334400};
  s.beta = {n / 2 - 2 * n2 / 3 + 37 * n3 / 96 - n4 / 360 - 81 * n5 / 512 + 96199 * n6 / 604800,
            n2 / 48 + n3 / 15 - 437 * n4 / 1440 + 46 * n5 / 105 - 1118711 * n6 / 3870720,
            17 * n3 / 480 - 37 * n4 / 840 - 209 * n5 / 4480 + 5569 * n6 / 90720,
            4397 * n4 / 161280 - 11 * n5 / 504 - 830251 * n6 / 7257600,
            4583 * n5 / 161280 - 108847 * n6 / 3991680,
            20648693 * n6 / 638668800};
  s.e = std::sqrt(wgs84::kEccentricitySq);
  return s;
}

const KruegerSeries& series() {
  static const KruegerSeries s = make_series();
  return s;
}

// Conformal latitude tangent from geodetic latitude tangent.
double conformal_tan(double tau, double e) {
  const double sigma = std::sinh(e * std::atanh(e * tau / std::hypot(1.0, tau)));
  return tau * std::hypot(1.0, sigma) - sigma * std::hypot(1.0, tau);
}

// Newton inversion of conformal_tan (Karney 2011, eq. 19-21).
double geodetic_tan(double tau_prime, double e) {
  const double e2m = 1.0 - e * e;
  double tau = tau_prime;
  for (int i = 0; i < 10; ++i) {
    const double tp = conformal_tan(tau, e);
    const double dtau = (tau_prime - tp) * (1.0 + e2m * tau * tau) /
                        (e2m * std::hypot(1.0, tp) * std::hypot(1.0, tau));
    tau += dtau;
    if (std::abs(dtau) < 1e-15 * std::max(1.0, std::abs(tau))) break;
  }
  return tau;
}

}  // namespace

bool is_valid(const GeodeticPoint& p) noexcept {
  return std::isfinite(p.alt) && p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 && p.lon < 180.0;
}

int utm_zone_for(double lon_deg) {
  int zone = static_cast<int>(std::floor((lon_deg + 180.0) / 6.0)) + 1;
  return std::clamp(zone, 1, 60);
}

double central_meridian(int zone) { return -183.0 + 6.0 * zone; }

double meridional_radius(double lat_deg) {
  const double s = std::sin(lat_deg * kDeg);
  const double w = 1.0 - wgs84::kEccentricitySq * s * s;
  return wgs84::kSemiMajor * (1.0 - wgs84::kEccentricitySq) / (w * std::sqrt(w));
}

double prime_vertical_radius(double lat_deg) {
  const double s = std::sin(lat_deg * kDeg);
  return wgs84::kSemiMajor / std::sqrt(1.0 - wgs84::kEccentricitySq * s * s);
}

GeodeticPoint utm_to_wgs84(const UtmPoint& p, double alt) {
  if (p.zone < 1 || p.zone > 60) {
    throw InvalidArgument("utm_to_wgs84: zone " + std::to_string(p.zone) + " outside 1..60");
  }
  if (!(p.easting > 0.0 && p.easting < 1e6)) throw InvalidArgument("utm_to_wgs84: easting out of range");
  if (!(p.northing >= 0.0 && p.northing < 1e7)) throw InvalidArgument("utm_to_wgs84: northing out of range");

  const auto& s = series();
  const double northing = p.hemisphere == Hemisphere::south ? p.northing - kFalseNorthingSouth : p.northing;
  const double xi = northing / (kScale * s.rectifying_radius);
  const double eta = (p.easting - kFalseEasting) / (kScale * s.rectifying_radius);

  double xi_p = xi, eta_p = eta;
  for (int j = 1; j <= 6; ++j) {
    xi_p -= s.beta[j - 1] * std::sin(2 * j * xi) * std::cosh(2 * j * eta);
    eta_p -= s.beta[j - 1] * std::cos(2 * j * xi) * std::sinh(2 * j * eta);
  }
  const double sinh_eta = std::sinh(eta_p);
  const double cos_xi = std::cos(xi_p);
  const double tau_prime = std::sin(xi_p) / std::hypot(sinh_eta, cos_xi);
  const double lam = std::atan2(sinh_eta, cos_xi);
  const double tau = geodetic_tan(tau_prime, s.e);

  GeodeticPoint out;
  out.lat = std::atan(tau) / kDeg;
  out.lon = central_meridian(p.zone) + lam / kDeg;
  if (out.lon >= 180.0) out.lon -= 360.0;
  if (out.lon < -180.0) out.lon += 360.0;
  out.alt = alt;
  return out;
}

UtmPoint wgs84_to_utm(const GeodeticPoint& p, int zone, Hemisphere hemisphere) {
  if (zone < 1 || zone > 60) throw InvalidArgument("wgs84_to_utm: zone outside 1..60");
  const auto& s = series();
  double dlon = p.lon - central_meridian(zone);
  if (dlon > 180.0) dlon -= 360.0;
  if (dlon < -180.0) dlon += 360.0;
  const double lam = dlon * kDeg;
  const double tau = std::tan(p.lat * kDeg);
  const double tau_p = conformal_tan(tau, s.e);
  const double xi_p = std::atan2(tau_p, std::cos(lam));
  const double eta_p = std::asinh(std::sin(lam) / std::hypot(tau_p, std::cos(lam)));

  double xi = xi_p, eta = eta_p;
  for (int j = 1; j <= 6; ++j) {
    xi += s.alpha[j - 1] * std::sin(2 * j * xi_p) * std::cosh(2 * j * eta_p);
    eta += s.alpha[j - 1] * std::cos(2 * j * xi_p) * std::sinh(2 * j * eta_p);
  }
  UtmPoint out;
  out.zone = zone;
  out.hemisphere = hemisphere;
  out.easting = kFalseEasting + kScale * s.rectifying_radius * eta;
  out.northing = kScale * s.rectifying_radius * xi;
  if (hemisphere == Hemisphere::south) out.northing += kFalseNorthingSouth;
  return out;
}

UtmPoint wgs84_to_utm(const GeodeticPoint& p) {
  return wgs84_to_utm(p, utm_zone_for(p.lon), p.lat < 0.0 ? Hemisphere::south : Hemisphere::north);
}

LocalFrame::LocalFrame(const GeodeticPoint& origin)
    : origin_(origin),
      m_per_deg_lat_(meridional_radius(origin.lat) * kDeg),
      m_per_deg_lon_(prime_vertical_radius(origin.lat) * std::cos(origin.lat * kDeg) * kDeg) {}

Eigen::Vector3d LocalFrame::to_local(const GeodeticPoint& p) const noexcept {
  return {(p.lon - origin_.lon) * m_per_deg_lon_, (p.lat - origin_.lat) * m_per_deg_lat_, p.alt - origin_.alt};
}

GeodeticPoint LocalFrame::to_geodetic(const Eigen::Vector3d& x) const noexcept {
  return {origin_.lat + x.y() / m_per_deg_lat_, origin_.lon + x.x() / m_per_deg_lon_, origin_.alt + x.z()};
}

Eigen::Matrix4d LocalFrame::transform_from(const LocalFrame& other) const noexcept {
  // x_this = (lon - lon0) * k = ((x_other / k_other + lon0_other) - lon0) * k
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t(0, 0) = m_per_deg_lon_ / other.m_per_deg_lon_;
  t(0, 3) = (other.origin_.lon - origin_.lon) * m_per_deg_lon_;
  t(1, 1) = m_per_deg_lat_ / other.m_per_deg_lat_;
  t(1, 3) = (other.origin_.lat - origin_.lat) * m_per_deg_lat_;
  t(2, 3) = other.origin_.alt - origin_.alt;
  return t;
}

}  // namespace satstereo::geo
