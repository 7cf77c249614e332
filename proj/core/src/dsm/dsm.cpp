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

#include "satstereo/dsm/dsm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>

#include <Eigen/SVD>

#include "satstereo/common/error.hpp"

namespace satstereo::dsm {

namespace {

constexpr float kNoData = -9999.0f;
constexpr double kRankTolerance = 1e-9;

}  // namespace

Triangulation triangulate_pair(const DisparityMap& disp, const rectify::PairGeometry& geom) {
  if (disp.rows() != geom.rows || disp.cols() != geom.cols) {
    throw InvalidArgument("triangulate_pair: disparity shape does not match the pair");
  }
  const geo::AffineCamera cam_b = geom.camera_b.rebased(geom.camera_a.local_origin());
  // [A_a; A_b] X = [p_a - t_a; p_b - t_b]; the system matrix is pixel-independent.
  Eigen::Matrix<double, 4, 3> a;
  a.topRows<2>() = geom.camera_a.matrix().leftCols<3>();
  a.bottomRows<2>() = cam_b.matrix().leftCols<3>();
  Eigen::Vector4d t;
  t << geom.camera_a.matrix().col(3), cam_b.matrix().col(3);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();

  Triangulation out;
  if (sv(2) <= kRankTolerance * sv(0)) {
    out.skipped = disp.valid_count();
    return out;
  }
  const Eigen::Matrix<double, 3, 4> pinv = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  const rectify::Homography ia = geom.h_a.inverse(), ib = geom.h_b.inverse();
  const geo::LocalFrame& frame = geom.camera_a.frame();
  out.points.reserve(disp.valid_count());
  for (std::size_t y = 0; y < disp.rows(); ++y) {
    for (std::size_t x = 0; x < disp.cols(); ++x) {
      if (!disp.valid(y, x)) continue;
      const double xd = static_cast<double>(x), yd = static_cast<double>(y);
      const Eigen::Vector2d pa = ia.apply({xd, yd});
      const Eigen::Vector2d pb = ib.apply({xd - disp.values(y, x), yd});
      const Eigen::Vector4d b = Eigen::Vector4d(pa.x(), pa.y(), pb.x(), pb.y()) - t;
      out.points.push_back(frame.to_geodetic(pinv * b));
    }
  }
  return out;
}

DsmGrid DsmGrid::covering(std::span<const geo::GeodeticPoint> points, double cell_size) {
  if (points.empty()) throw InvalidArgument("DsmGrid::covering: no points");
  if (!(cell_size > 0.0)) throw InvalidArgument("DsmGrid::covering: cell_size must be > 0");
  const geo::UtmPoint first = geo::wgs84_to_utm(points.front());
  double e0 = first.easting, e1 = first.easting, n0 = first.northing, n1 = first.northing;
  for (const auto& p : points) {
    const auto u = geo::wgs84_to_utm(p, first.zone, first.hemisphere);
    e0 = std::min(e0, u.easting);
    e1 = std::max(e1, u.easting);
    n0 = std::min(n0, u.northing);
    n1 = std::max(n1, u.northing);
  }
  DsmGrid g;
  g.cell_size = cell_size;
  g.origin = first;
  g.origin.easting = std::floor(e0 / cell_size) * cell_size;
  g.origin.northing = (std::floor(n1 / cell_size) + 1.0) * cell_size;
  g.cols = static_cast<std::size_t>(std::floor((e1 - g.origin.easting) / cell_size)) + 1;
  g.rows = static_cast<std::size_t>(std::floor((g.origin.northing - n0) / cell_size)) + 1;
  return g;
}

bool DsmGrid::locate(double easting, double northing, std::size_t& row, std::size_t& col) const noexcept {
  const double c = std::floor((easting - origin.easting) / cell_size);
  const double r = std::floor((origin.northing - northing) / cell_size);
  if (!(c >= 0.0 && r >= 0.0 && c < static_cast<double>(cols) && r < static_cast<double>(rows))) return false;
  row = static_cast<std::size_t>(r);
  col = static_cast<std::size_t>(c);
  return true;
}

geo::UtmPoint DsmGrid::cell_center(std::size_t row, std::size_t col) const noexcept {
  geo::UtmPoint p = origin;
  p.easting += (static_cast<double>(col) + 0.5) * cell_size;
  p.northing -= (static_cast<double>(row) + 0.5) * cell_size;
  return p;
}

PairwiseDsm rasterize_dsm(std::span<const geo::GeodeticPoint> points, const DsmGrid& grid,
                          const std::string& pair_id) {
  if (!(grid.cell_size > 0.0)) throw InvalidArgument("rasterize_dsm: cell_size must be > 0");
  PairwiseDsm out{grid, ImageF(grid.rows, grid.cols, std::numeric_limits<float>::quiet_NaN()),
                  Raster<std::uint32_t>(grid.rows, grid.cols, 0), pair_id};
  for (const auto& p : points) {
    const auto u = geo::wgs84_to_utm(p, grid.origin.zone, grid.origin.hemisphere);
    std::size_t r = 0, c = 0;
    if (!grid.locate(u.easting, u.northing, r, c)) continue;
    float& z = out.elevations(r, c);
    const auto alt = static_cast<float>(p.alt);
    if (out.counts(r, c) == 0 || alt > z) z = alt;
    ++out.counts(r, c);
  }
  return out;
}

double fuse_samples(std::vector<double> samples, double bin, std::uint32_t* support) {
  if (support) *support = 0;
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(samples.begin(), samples.end());
  // Sorted samples make each bin a contiguous run; keep the first (lowest)
  // run of maximal length.
  std::size_t best_begin = 0, best_len = 0;
  for (std::size_t i = 0; i < samples.size();) {
    const double key = std::floor(samples[i] / bin);
    std::size_t j = i + 1;
    while (j < samples.size() && std::floor(samples[j] / bin) == key) ++j;
    if (j - i > best_len) {
      best_begin = i;
      best_len = j - i;
    }
    i = j;
  }
  if (support) *support = static_cast<std::uint32_t>(best_len);
  const std::size_t mid = best_begin + best_len / 2;
  return best_len % 2 == 1 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
}

FusedDsm fuse_dsms(std::span<const PairwiseDsm> dsms, double bin) {
  if (dsms.empty()) throw InvalidArgument("fuse_dsms: no inputs");
  if (!(bin > 0.0)) throw InvalidArgument("fuse_dsms: bin must be > 0");
  const DsmGrid& grid = dsms.front().grid;
  for (const auto& d : dsms) {
    if (!(d.grid == grid) || d.elevations.rows() != grid.rows || d.elevations.cols() != grid.cols) {
      throw InvalidArgument("fuse_dsms: inputs are not on one grid");
    }
  }
  FusedDsm out{grid, ImageF(grid.rows, grid.cols, std::numeric_limits<float>::quiet_NaN()),
               Raster<std::uint32_t>(grid.rows, grid.cols, 0), bin};
  std::vector<double> samples;
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      samples.clear();
      for (const auto& d : dsms) {
        if (std::isfinite(d.elevations(r, c))) samples.push_back(d.elevations(r, c));
      }
      std::uint32_t support = 0;
      const double z = fuse_samples(samples, bin, &support);
      out.elevations(r, c) = static_cast<float>(z);
      out.support(r, c) = support;
    }
  }
  return out;
}

void write_esri_ascii(const std::filesystem::path& path, const DsmGrid& grid, const ImageF& elevations) {
  if (elevations.rows() != grid.rows || elevations.cols() != grid.cols) {
    throw InvalidArgument("write_esri_ascii: raster does not match grid");
  }
  std::ofstream out(path);
  if (!out) throw Error("write_esri_ascii: cannot open " + path.string());
  out << std::setprecision(12);
  out << "ncols " << grid.cols << "\nnrows " << grid.rows << "\nxllcorner " << grid.origin.easting
      << "\nyllcorner " << grid.origin.northing - static_cast<double>(grid.rows) * grid.cell_size << "\ncellsize "
      << grid.cell_size << "\nNODATA_value " << kNoData << '\n';
  out << std::setprecision(9);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const float v = elevations(r, c);
      out << (c ? " " : "") << (std::isfinite(v) ? v : kNoData);
    }
    out << '\n';
  }
}

EsriGrid read_esri_ascii(const std::filesystem::path& path, int zone, geo::Hemisphere hemisphere) {
  std::ifstream in(path);
  if (!in) throw FormatError("read_esri_ascii: cannot open " + path.string());
  std::map<std::string, double> header;
  for (const char* key : {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "NODATA_value"}) {
    std::string k;
    double v = 0.0;
    if (!(in >> k >> v) || k != key) throw FormatError(std::string("read_esri_ascii: expected ") + key);
    header[k] = v;
  }
  EsriGrid g;
  g.grid.cols = static_cast<std::size_t>(header["ncols"]);
  g.grid.rows = static_cast<std::size_t>(header["nrows"]);
  g.grid.cell_size = header["cellsize"];
  g.grid.origin = {header["xllcorner"], header["yllcorner"] + static_cast<double>(g.grid.rows) * g.grid.cell_size, zone,
                   hemisphere};
  g.elevations = ImageF(g.grid.rows, g.grid.cols);
  const double nodata = header["NODATA_value"];
  for (auto& v : g.elevations.pixels()) {
    double x = 0.0;
    if (!(in >> x)) throw FormatError("read_esri_ascii: truncated data");
    v = x == nodata ? std::numeric_limits<float>::quiet_NaN() : static_cast<float>(x);
  }
  return g;
}

void write_xyz(const std::filesystem::path& path, std::span<const geo::GeodeticPoint> points, int zone,
               geo::Hemisphere hemisphere) {
  std::ofstream out(path);
  if (!out) throw Error("write_xyz: cannot open " + path.string());
  out << std::fixed << std::setprecision(3);
  for (const auto& p : points) {
    const auto u = geo::wgs84_to_utm(p, zone, hemisphere);
    out << u.easting << ' ' << u.northing << ' ' << p.alt << '\n';
  }
}

}  // namespace satstereo::dsm
