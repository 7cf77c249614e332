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

#include "satstereo/pipeline/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/LU>
#include <nlohmann/json.hpp>

#include "satstereo/common/error.hpp"
#include "satstereo/io/pnm.hpp"

namespace satstereo::pipeline {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double lattice(std::int64_t i, std::int64_t j, std::int64_t k, std::uint64_t seed) {
  std::uint64_t h = mix(seed);
  h = mix(h ^ static_cast<std::uint64_t>(i));
  h = mix(h ^ static_cast<std::uint64_t>(j));
  h = mix(h ^ static_cast<std::uint64_t>(k));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * (3.0 - 2.0 * t); }

// Trilinear value noise with smoothstep weights, in [0, 1).
double value_noise(double x, double y, double z, std::uint64_t seed) {
  const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy),
             iz = static_cast<std::int64_t>(fz);
  const double tx = fade(x - fx), ty = fade(y - fy), tz = fade(z - fz);
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
    acc += w * lattice(ix + dx, iy + dy, iz + dz, seed);
  }
  return acc;
}

double texture(const SyntheticSceneSpec& spec, double x, double y, double z) {
  double sum = 0.0, norm = 0.0, amp = 1.0, f = 1.0 / spec.texture_scale;
  for (int octave = 0; octave < 3; ++octave) {
    sum += amp * value_noise(x * f, y * f, z * f, spec.seed + static_cast<std::uint64_t>(octave));
    norm += amp;
    amp *= 0.5;
    f *= 2.0;
  }
  return sum / norm;
}

double max_height(const SyntheticSceneSpec& spec) {
  double h = 0.0;
  for (const auto& b : spec.buildings) h = std::max(h, b.height);
  return h;
}

}  // namespace

SyntheticSurface::SyntheticSurface(const SyntheticSceneSpec& spec) {
  const geo::LocalFrame f(spec.origin);
  const auto o = geo::wgs84_to_utm(spec.origin);
  auto utm = [&](double x, double y) -> Eigen::Vector2d {
    const auto u = geo::wgs84_to_utm(f.to_geodetic({x, y, 0.0}), o.zone, o.hemisphere);
    return {u.easting, u.northing};
  };
  origin_utm_ = {o.easting, o.northing};
  jacobian_.col(0) = (utm(1.0, 0.0) - utm(-1.0, 0.0)) / 2.0;
  jacobian_.col(1) = (utm(0.0, 1.0) - utm(0.0, -1.0)) / 2.0;
  const double cell = spec.dsm_cell;
  auto snap = [cell](double v) { return std::round(v / cell) * cell; };
  for (const auto& b : spec.buildings) {
    Footprint fp{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                 std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), b.height};
    for (double x : {b.east_min, b.east_max})
      for (double y : {b.north_min, b.north_max}) {
        const auto u = utm(x, y);
        fp.e0 = std::min(fp.e0, u.x());
        fp.e1 = std::max(fp.e1, u.x());
        fp.n0 = std::min(fp.n0, u.y());
        fp.n1 = std::max(fp.n1, u.y());
      }
    fp.e0 = snap(fp.e0);
    fp.e1 = snap(fp.e1);
    fp.n0 = snap(fp.n0);
    fp.n1 = snap(fp.n1);
    footprints_.push_back(fp);
  }
}

double SyntheticSurface::at_utm(double easting, double northing) const noexcept {
  double h = 0.0;
  for (const auto& b : footprints_) {
    if (easting >= b.e0 && easting < b.e1 && northing >= b.n0 && northing < b.n1) h = std::max(h, b.height);
  }
  return h;
}

Eigen::Vector2d SyntheticSurface::local_to_utm(double east, double north) const noexcept {
  return origin_utm_ + jacobian_ * Eigen::Vector2d(east, north);
}

double SyntheticSurface::at_local(double east, double north) const noexcept {
  const Eigen::Vector2d u = local_to_utm(east, north);
  return at_utm(u.x(), u.y());
}

geo::GeodeticBox scene_bbox(const SyntheticSceneSpec& spec) {
  const geo::LocalFrame f(spec.origin);
  const auto lo = f.to_geodetic({-spec.half_extent, -spec.half_extent, -5.0});
  const auto hi = f.to_geodetic({spec.half_extent, spec.half_extent, max_height(spec) + 10.0});
  return {lo.lat, hi.lat, lo.lon, hi.lon, lo.alt, hi.alt};
}

std::size_t view_size(const SyntheticSceneSpec& spec) {
  double half = 0.0;
  const double top = max_height(spec) + 10.0;
  for (const auto& v : spec.views) {
    const double spread = spec.half_extent / spec.gsd * (std::abs(std::cos(v.angle)) + std::abs(std::sin(v.angle)));
    half = std::max(half, spread + std::max(std::abs(v.lean_sample), std::abs(v.lean_line)) * top);
  }
  const auto n = static_cast<std::size_t>(std::ceil(2.0 * half)) + 16;
  return (n + 15) / 16 * 16;
}

geo::AffineCamera view_camera(const SyntheticSceneSpec& spec, const SyntheticView& view, std::size_t rows,
                              std::size_t cols) {
  if (!(spec.gsd > 0.0)) throw InvalidArgument("view_camera: gsd must be > 0");
  geo::AffineCamera::Matrix m;
  const double c = std::cos(view.angle) / spec.gsd, s = std::sin(view.angle) / spec.gsd;
  // Lines grow southward.
  m << c, s, view.lean_sample, static_cast<double>(cols) / 2.0, s, -c, view.lean_line, static_cast<double>(rows) / 2.0;
  return geo::AffineCamera(m, spec.origin);
}

geo::RpcCamera affine_to_rpc(const geo::AffineCamera& cam, const geo::GeodeticBox& volume, std::size_t rows,
                             std::size_t cols) {
  geo::RpcCamera rpc;
  auto& n = rpc.norm;
  n.lat_off = (volume.lat_min + volume.lat_max) / 2;
  n.lat_scale = (volume.lat_max - volume.lat_min) / 2;
  n.lon_off = (volume.lon_min + volume.lon_max) / 2;
  n.lon_scale = (volume.lon_max - volume.lon_min) / 2;
  n.height_off = (volume.alt_min + volume.alt_max) / 2;
  n.height_scale = std::max((volume.alt_max - volume.alt_min) / 2, 1.0);
  n.samp_off = static_cast<double>(cols) / 2;
  n.samp_scale = std::max(static_cast<double>(cols) / 2, 1.0);
  n.line_off = static_cast<double>(rows) / 2;
  n.line_scale = std::max(static_cast<double>(rows) / 2, 1.0);
  if (!(n.lat_scale > 0.0 && n.lon_scale > 0.0)) throw InvalidArgument("affine_to_rpc: degenerate volume");

  // The local frame is linear in (lat, lon, alt), so each image coordinate
  // is an exact linear function of the normalized terms 1, L, P, H.
  const auto& m = cam.matrix();
  const auto& f = cam.frame();
  const auto& o = f.origin();
  const double mlon = f.meters_per_deg_lon(), mlat = f.meters_per_deg_lat();
  auto fill = [&](int row, double off, double scale, geo::RpcCamera::Coefficients& num) {
    num.fill(0.0);
    num[0] = (m(row, 0) * mlon * (n.lon_off - o.lon) + m(row, 1) * mlat * (n.lat_off - o.lat) +
              m(row, 2) * (n.height_off - o.alt) + m(row, 3) - off) /
             scale;
    num[1] = m(row, 0) * mlon * n.lon_scale / scale;
    num[2] = m(row, 1) * mlat * n.lat_scale / scale;
    num[3] = m(row, 2) * n.height_scale / scale;
  };
  fill(0, n.samp_off, n.samp_scale, rpc.samp_num);
  fill(1, n.line_off, n.line_scale, rpc.line_num);
  rpc.samp_den.fill(0.0);
  rpc.line_den.fill(0.0);
  rpc.samp_den[0] = 1.0;
  rpc.line_den[0] = 1.0;
  return rpc;
}

ImageF render_view(const SyntheticSceneSpec& spec, const geo::AffineCamera& cam, std::size_t rows,
                   std::size_t cols) {
  const auto& m = cam.matrix();
  const Eigen::Matrix2d a = m.block<2, 2>(0, 0);
  if (std::abs(a.determinant()) < 1e-12) throw InvalidArgument("render_view: camera is not invertible on the ground");
  const Eigen::Matrix2d ainv = a.inverse();
  const Eigen::Vector2d lean = m.col(2), offset = m.col(3);
  const double top = max_height(spec) + 1.0;
  constexpr double kStep = 0.25;
  const SyntheticSurface surface(spec);

  auto ground_at = [&](const Eigen::Vector2d& px, double z) -> Eigen::Vector2d {
    return ainv * (px - lean * z - offset);
  };
  auto above = [&](const Eigen::Vector2d& px, double z) {
    const Eigen::Vector2d g = ground_at(px, z);
    return surface.at_local(g.x(), g.y()) < z;
  };

  auto shade = [&](const Eigen::Vector2d& px) {
    // March down to the first sample on or below the surface; z = 0 always is.
    double z_hi = top, z_lo = top;
    while (true) {
      z_lo = std::max(z_hi - kStep, 0.0);
      if (!above(px, z_lo)) break;
      z_hi = z_lo;
    }
    for (int it = 0; it < 40 && z_hi - z_lo > 1e-6; ++it) {
      const double mid = 0.5 * (z_lo + z_hi);
      (above(px, mid) ? z_hi : z_lo) = mid;
    }
    const double z = std::max(z_lo, 0.0);
    const Eigen::Vector2d g = ground_at(px, z);
    const double h = surface.at_local(g.x(), g.y());
    double light;
    if (std::abs(h - z) < 1e-3) {
      light = h > 0.0 ? 1.0 : 0.85;
    } else {
      // Walls run along UTM axes; an east or west face changes height across easting.
      constexpr double e = 0.05;
      const Eigen::Vector2d u = surface.local_to_utm(g.x(), g.y());
      const bool ew = surface.at_utm(u.x() + e, u.y()) != surface.at_utm(u.x() - e, u.y());
      light = ew ? 0.55 : 0.7;
    }
    return light * (0.25 + 0.75 * texture(spec, g.x(), g.y(), z));
  };

  ImageF img(rows, cols);
  constexpr std::array<double, 2> kSub{-0.25, 0.25};
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      double sum = 0.0;
      for (double dy : kSub)
        for (double dx : kSub) sum += shade({static_cast<double>(c) + dx, static_cast<double>(r) + dy});
      img(r, c) = static_cast<float>(std::clamp(sum / 4.0, 0.0, 1.0));
    }
  return img;
}

dsm::DsmGrid scene_grid(const geo::GeodeticBox& bbox, double cell_size) {
  const std::array<geo::GeodeticPoint, 4> corners{geo::GeodeticPoint{bbox.lat_min, bbox.lon_min, 0.0},
                                                  {bbox.lat_min, bbox.lon_max, 0.0},
                                                  {bbox.lat_max, bbox.lon_min, 0.0},
                                                  {bbox.lat_max, bbox.lon_max, 0.0}};
  return dsm::DsmGrid::covering(corners, cell_size);
}

namespace {

ImageF sample_heights(const SyntheticSceneSpec& spec, const dsm::DsmGrid& grid) {
  const SyntheticSurface surface(spec);
  ImageF out(grid.rows, grid.cols);
  for (std::size_t r = 0; r < grid.rows; ++r)
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const auto u = grid.cell_center(r, c);
      out(r, c) = static_cast<float>(spec.origin.alt + surface.at_utm(u.easting, u.northing));
    }
  return out;
}

}  // namespace

gt::LidarGrid synthetic_lidar(const SyntheticSceneSpec& spec) {
  const auto grid = scene_grid(scene_bbox(spec), spec.lidar_cell);
  gt::LidarGrid l;
  l.elevations = sample_heights(spec, grid);
  l.origin = grid.cell_center(0, 0);
  l.cell_size = spec.lidar_cell;
  return l;
}

dsm::EsriGrid synthetic_truth_dsm(const SyntheticSceneSpec& spec) {
  const auto grid = scene_grid(scene_bbox(spec), spec.dsm_cell);
  return {grid, sample_heights(spec, grid)};
}

fs::path write_synthetic_scene(const fs::path& dir, const SyntheticSceneSpec& spec) {
  if (spec.views.size() < 2) throw InvalidArgument("write_synthetic_scene: at least two views are required");
  fs::create_directories(dir);
  const auto bbox = scene_bbox(spec);
  const std::size_t n = view_size(spec);
  nlohmann::json images = nlohmann::json::array(), rpcs = nlohmann::json::array();
  for (std::size_t k = 0; k < spec.views.size(); ++k) {
    const auto cam = view_camera(spec, spec.views[k], n, n);
    const std::string stem = "view_" + std::to_string(k);
    io::write_pgm16(dir / (stem + ".pgm"), io::to_u16(render_view(spec, cam, n, n)));
    geo::write_rpc(dir / (stem + ".rpc"), affine_to_rpc(cam, bbox, n, n));
    images.push_back(stem + ".pgm");
    rpcs.push_back(stem + ".rpc");
  }
  gt::write_lidar(dir / "lidar.pfm", synthetic_lidar(spec));
  const auto truth = synthetic_truth_dsm(spec);
  dsm::write_esri_ascii(dir / "truth_dsm.asc", truth.grid, truth.elevations);

  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t k = 1; k < spec.views.size(); ++k) pairs.push_back({0, k});
  const nlohmann::json cfg = {
      {"output_dir", "run"},
      {"seed", spec.seed},
      {"scene",
       {{"images", images},
        {"rpcs", rpcs},
        {"lidar", "lidar.pfm"},
        {"truth_dsm", "truth_dsm.asc"},
        {"ground_plane_alt", spec.origin.alt + spec.zero_disparity_alt},
        {"bbox",
         {{"lat_min", bbox.lat_min},
          {"lat_max", bbox.lat_max},
          {"lon_min", bbox.lon_min},
          {"lon_max", bbox.lon_max},
          {"alt_min", bbox.alt_min},
          {"alt_max", bbox.alt_max}}},
        {"pairs", pairs}}},
      {"gt", {{"kind", "dense"}}},
      {"tiling", {{"tile_rows", 32}, {"tile_cols", 64}, {"step", 32}, {"min_density", 0.40}}},
      {"matcher", "sgm"},
      {"network",
       {{"base_channels", 8},
        {"max_disparity", 64},
        {"block_repeats", {1, 1, 1, 1}},
        {"spp_pool_sizes", {8, 4, 2, 1}}}},
      {"train", {{"steps", 200}, {"batch_size", 4}, {"learning_rate", 1e-4}}},
      {"sgm", {{"max_disparity", 64}, {"uniqueness", 0.25}, {"speckle_size", 100}}},
      {"dsm", {{"cell_size", spec.dsm_cell}, {"fusion_bin", 0.5}}}};
  const fs::path path = dir / "config.json";
  std::ofstream out(path);
  if (!out) throw Error("write_synthetic_scene: cannot write " + path.string());
  out << cfg.dump(2) << '\n';
  return path;
}

}  // namespace satstereo::pipeline
