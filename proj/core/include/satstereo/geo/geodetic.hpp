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

#include <Eigen/Core>

namespace satstereo::geo {

/// WGS84 ellipsoid constants.
namespace wgs84 {
inline constexpr double kSemiMajor = 6378137.0;
inline constexpr double kInverseFlattening = 298.257223563;
inline constexpr double kFlattening = 1.0 / kInverseFlattening;
inline constexpr double kEccentricitySq = kFlattening * (2.0 - kFlattening);
}  // namespace wgs84

/// Latitude/longitude in degrees (WGS84) and altitude in meters above the
/// ellipsoid. Valid points have lat in [-90, 90] and lon in [-180, 180).
struct GeodeticPoint {
  double lat = 0.0;
  double lon = 0.0;
  double alt = 0.0;

  friend bool operator==(const GeodeticPoint&, const GeodeticPoint&) = default;
};

bool is_valid(const GeodeticPoint& p) noexcept;

enum class Hemisphere { north, south };

struct UtmPoint {
  double easting = 0.0;
  double northing = 0.0;
  int zone = 1;
  Hemisphere hemisphere = Hemisphere::north;

  friend bool operator==(const UtmPoint&, const UtmPoint&) = default;
};

/// Axis-aligned geodetic volume. A zero altitude range (flat volume) is
/// allowed; the horizontal extents must be positive.
struct GeodeticBox {
  double lat_min = 0.0, lat_max = 0.0;
  double lon_min = 0.0, lon_max = 0.0;
  double alt_min = 0.0, alt_max = 0.0;

  GeodeticPoint center() const noexcept {
    return {(lat_min + lat_max) / 2, (lon_min + lon_max) / 2, (alt_min + alt_max) / 2};
  }
};

/// Inverse transverse Mercator (k0 = 0.9996, false easting 500 km, false
/// northing 10000 km in the south). Evaluated with the 6th-order Krueger
/// series, accurate to well below a millimetre inside a zone.
/// Throws InvalidArgument for a zone outside 1..60, easting outside
/// (0, 1e6) or northing outside [0, 1e7).
GeodeticPoint utm_to_wgs84(const UtmPoint& p, double alt = 0.0);

/// Forward transverse Mercator into the given zone.
UtmPoint wgs84_to_utm(const GeodeticPoint& p, int zone, Hemisphere hemisphere);
/// Forward transverse Mercator into the standard zone for p.lon.
UtmPoint wgs84_to_utm(const GeodeticPoint& p);

int utm_zone_for(double lon_deg);
double central_meridian(int zone);

/// Meridional (M) and prime-vertical (N) radii of curvature at a latitude.
double meridional_radius(double lat_deg);
double prime_vertical_radius(double lat_deg);

/// Equirectangular local Euclidean frame (east, north, up) anchored at an
/// origin. The mapping to and from geodetic coordinates is exactly affine,
/// so affine cameras remain affine when re-expressed in another frame.
class LocalFrame {
 public:
  LocalFrame() : LocalFrame(GeodeticPoint{}) {}
  explicit LocalFrame(const GeodeticPoint& origin);

  const GeodeticPoint& origin() const noexcept { return origin_; }
  double meters_per_deg_lat() const noexcept { return m_per_deg_lat_; }
  double meters_per_deg_lon() const noexcept { return m_per_deg_lon_; }

  Eigen::Vector3d to_local(const GeodeticPoint& p) const noexcept;
  GeodeticPoint to_geodetic(const Eigen::Vector3d& x) const noexcept;

  /// 4x4 homogeneous transform taking coordinates in `other` to this frame.
  Eigen::Matrix4d transform_from(const LocalFrame& other) const noexcept;

 private:
  GeodeticPoint origin_;
  double m_per_deg_lat_ = 0.0;
  double m_per_deg_lon_ = 0.0;
};

}  // namespace satstereo::geo
