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

#include "satstereo/gt/ground_truth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "satstereo/common/error.hpp"
#include "satstereo/gt/delaunay.hpp"
#include "satstereo/io/pnm.hpp"

namespace satstereo::gt {

namespace {

std::filesystem::path sidecar(const std::filesystem::path& p, const char* suffix) {
  auto s = p;
  s += suffix;
  return s;
}

bool is_nodata(float v, float nodata) {
  return !std::isfinite(v) || (!std::isnan(nodata) && v == nodata);
}

}  // namespace

bool LidarGrid::is_valid(std::size_t r, std::size_t c) const noexcept {
  return !is_nodata(elevations(r, c), nodata);
}

geo::UtmPoint LidarGrid::cell_center(std::size_t r, std::size_t c) const noexcept {
  geo::UtmPoint p = origin;
  p.easting += static_cast<double>(c) * cell_size;
  p.northing -= static_cast<double>(r) * cell_size;
  return p;
}

void LidarGrid::validate() const {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) throw InvalidArgument("LidarGrid: cell_size must be > 0");
  for (float v : elevations.pixels()) {
    if (!std::isfinite(v) && !std::isnan(nodata)) throw InvalidArgument("LidarGrid: non-finite elevation");
    if (std::isinf(v)) throw InvalidArgument("LidarGrid: infinite elevation");
  }
}

LidarGrid read_lidar(const std::filesystem::path& pfm_path) {
  LidarGrid g;
  g.elevations = io::read_pfm(pfm_path);
  std::ifstream in(sidecar(pfm_path, ".json"));
  if (!in) throw FormatError("read_lidar: missing sidecar " + sidecar(pfm_path, ".json").string());
  nlohmann::json j;
  try {
    in >> j;
    g.origin.easting = j.at("origin_easting").get<double>();
    g.origin.northing = j.at("origin_northing").get<double>();
    g.origin.zone = j.at("zone").get<int>();
    const auto hemi = j.at("hemisphere").get<std::string>();
    if (hemi != "N" && hemi != "S") throw FormatError("read_lidar: hemisphere must be N or S");
    g.origin.hemisphere = hemi == "N" ? geo::Hemisphere::north : geo::Hemisphere::south;
    g.cell_size = j.at("cell_size").get<double>();
    const auto& nd = j.at("nodata");
    g.nodata = nd.is_null() ? std::numeric_limits<float>::quiet_NaN() : nd.get<float>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("read_lidar: bad sidecar: ") + e.what());
  }
  g.validate();
  return g;
}

void write_lidar(const std::filesystem::path& pfm_path, const LidarGrid& grid) {
  grid.validate();
  io::write_pfm(pfm_path, grid.elevations);
  nlohmann::json j{{"origin_easting", grid.origin.easting},
                   {"origin_northing", grid.origin.northing},
                   {"zone", grid.origin.zone},
                   {"hemisphere", grid.origin.hemisphere == geo::Hemisphere::north ? "N" : "S"},
                   {"cell_size", grid.cell_size}};
  if (std::isnan(grid.nodata)) {
    j["nodata"] = nullptr;
  } else {
    j["nodata"] = grid.nodata;
  }
  std::ofstream out(sidecar(pfm_path, ".json"));
  if (!out) throw Error("write_lidar: cannot open sidecar");
  out << j.dump(2) << '\n';
}

void write_disparity(const std::filesystem::path& pfm_path, const DisparityMap& d) {
  ImageF v = d.values;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!d.valid.data()[i]) v.data()[i] = std::numeric_limits<float>::quiet_NaN();
  }
  io::write_pfm(pfm_path, v);
  io::write_mask_pgm(sidecar(pfm_path, ".valid.pgm"), d.valid);
}

DisparityMap read_disparity(const std::filesystem::path& pfm_path) {
  ImageF v = io::read_pfm(pfm_path);
  Mask m = io::read_mask_pgm(sidecar(pfm_path, ".valid.pgm"));
  if (m.rows() != v.rows() || m.cols() != v.cols()) throw FormatError("read_disparity: mask shape mismatch");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!m.data()[i]) v.data()[i] = 0.0f;
  }
  return DisparityMap(std::move(v), std::move(m));
}

SparseBuild build_sparse_disparity(const LidarGrid& lidar, const rectify::PairGeometry& geom) {
  if (geom.rows == 0 || geom.cols == 0) throw InvalidArgument("build_sparse_disparity: empty output dims");
  SparseBuild out{SparseDisparity(geom.rows, geom.cols),
                  ImageF(geom.rows, geom.cols, std::numeric_limits<float>::quiet_NaN())};
  // Both cameras share camera A's local frame so each point is converted once.
  const geo::AffineCamera cam_b = geom.camera_b.rebased(geom.camera_a.local_origin());
  const geo::LocalFrame& frame = geom.camera_a.frame();
  const long rows = static_cast<long>(geom.rows), cols = static_cast<long>(geom.cols);

  for (std::size_t r = 0; r < lidar.elevations.rows(); ++r) {
    for (std::size_t c = 0; c < lidar.elevations.cols(); ++c) {
      if (!lidar.is_valid(r, c)) continue;
      const double alt = lidar.elevations(r, c);
      const geo::GeodeticPoint g = geo::utm_to_wgs84(lidar.cell_center(r, c), alt);
      const Eigen::Vector3d x = frame.to_local(g);
      const Eigen::Vector2d pa = geom.h_a.apply(geom.camera_a.project_local(x));
      const Eigen::Vector2d pb = geom.h_b.apply(cam_b.project_local(x));
      const long col = std::lround(pa.x()), row = std::lround(pa.y());
      if (row < 0 || col < 0 || row >= rows || col >= cols) continue;
      const auto ur = static_cast<std::size_t>(row), uc = static_cast<std::size_t>(col);
      if (out.disparity.valid(ur, uc) && out.altitude(ur, uc) >= alt) continue;
      out.disparity.values(ur, uc) = static_cast<float>(pa.x() - pb.x());
      out.disparity.valid(ur, uc) = 1;
      out.altitude(ur, uc) = static_cast<float>(alt);
    }
  }
  if (out.disparity.valid_count() == 0) {
    throw EmptyResult("build_sparse_disparity: LiDAR footprint does not overlap the image");
  }
  return out;
}

SparseDisparity remove_bleedthrough(const SparseDisparity& sp, const ImageF& altitude, double tolerance,
                                    int radius) {
  if (radius < 1) throw InvalidArgument("remove_bleedthrough: radius must be >= 1");
  if (altitude.rows() != sp.rows() || altitude.cols() != sp.cols()) {
    throw InvalidArgument("remove_bleedthrough: altitude raster shape mismatch");
  }
  const std::size_t rows = sp.rows(), cols = sp.cols();
  const float lowest = -std::numeric_limits<float>::infinity();
  // Separable max filter over valid altitudes.
  ImageF horiz(rows, cols, lowest);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      float m = lowest;
      const std::size_t c0 = c >= static_cast<std::size_t>(radius) ? c - radius : 0;
      const std::size_t c1 = std::min(cols - 1, c + radius);
      for (std::size_t k = c0; k <= c1; ++k) {
        if (sp.valid(r, k)) m = std::max(m, altitude(r, k));
      }
      horiz(r, c) = m;
    }
  }
  SparseDisparity out = sp;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t r0 = r >= static_cast<std::size_t>(radius) ? r - radius : 0;
    const std::size_t r1 = std::min(rows - 1, r + radius);
    for (std::size_t c = 0; c < cols; ++c) {
      if (!sp.valid(r, c)) continue;
      float m = lowest;
      for (std::size_t k = r0; k <= r1; ++k) m = std::max(m, horiz(k, c));
      if (static_cast<double>(altitude(r, c)) < static_cast<double>(m) - tolerance) {
        out.valid(r, c) = 0;
        out.values(r, c) = 0.0f;
      }
    }
  }
  return out;
}

DenseDisparity densify_disparity(const SparseDisparity& sp) {
  std::vector<GridPoint> pts;
  std::vector<double> vals;
  for (std::size_t r = 0; r < sp.rows(); ++r) {
    for (std::size_t c = 0; c < sp.cols(); ++c) {
      if (!sp.valid(r, c)) continue;
      pts.push_back({static_cast<std::int32_t>(c), static_cast<std::int32_t>(r)});
      vals.push_back(sp.values(r, c));
    }
  }
  if (pts.empty()) throw InvalidArgument("densify_disparity: no valid pixels");
  const Delaunay tri(pts);

  DenseDisparity out(sp.rows(), sp.cols());
  const auto& t = tri.triangles();
  for (std::size_t k = 0; k < t.size(); k += 3) {
    const GridPoint &a = pts[t[k]], &b = pts[t[k + 1]], &c = pts[t[k + 2]];
    const std::int64_t area = orient2d(a, b, c);
    if (area == 0) continue;
    const double va = vals[t[k]], vb = vals[t[k + 1]], vc = vals[t[k + 2]];
    const int x0 = std::min({a.x, b.x, c.x}), x1 = std::max({a.x, b.x, c.x});
    const int y0 = std::min({a.y, b.y, c.y}), y1 = std::max({a.y, b.y, c.y});
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const GridPoint p{x, y};
        // Barycentric weights scaled by the signed area; all share its sign inside.
        std::int64_t wa = orient2d(b, c, p), wb = orient2d(c, a, p), wc = orient2d(a, b, p);
        if (area < 0) {
          wa = -wa;
          wb = -wb;
          wc = -wc;
        }
        if (wa < 0 || wb < 0 || wc < 0) continue;
        const double s = static_cast<double>(wa + wb + wc);
        const double v = (static_cast<double>(wa) * va + static_cast<double>(wb) * vb + static_cast<double>(wc) * vc) / s;
        out.values(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = static_cast<float>(v);
        out.valid(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 1;
      }
    }
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto r = static_cast<std::size_t>(pts[i].y), c = static_cast<std::size_t>(pts[i].x);
    out.values(r, c) = sp.values(r, c);
  }
  return out;
}

}  // namespace satstereo::gt
