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

#include "satstereo/dataset/tiles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "satstereo/common/error.hpp"
#include "satstereo/gt/ground_truth.hpp"
#include "satstereo/io/pnm.hpp"

namespace satstereo::dataset {

namespace {

float min_valid(const DisparityMap& d) {
  float m = std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    if (d.valid.data()[i]) m = std::min(m, d.values.data()[i]);
  }
  return m;
}

// right'(c) = right(c + s); columns shifted in from outside are zero.
ImageF shift_left(const ImageF& img, int s) {
  ImageF out(img.rows(), img.cols(), 0.0f);
  const auto cols = static_cast<long>(img.cols());
  for (std::size_t r = 0; r < img.rows(); ++r) {
    for (long c = 0; c + s < cols; ++c) out(r, static_cast<std::size_t>(c)) = img(r, static_cast<std::size_t>(c + s));
  }
  return out;
}

// Disparity referenced to the right view: value -d at column round(x - d).
// Where several left pixels map to one right pixel the largest value (the
// nearest surface) wins.
DisparityMap reindex_to_right(const DisparityMap& d) {
  DisparityMap out(d.rows(), d.cols());
  const auto cols = static_cast<long>(d.cols());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) {
      if (!d.valid(r, c)) continue;
      const float v = d.values(r, c);
      const long x = std::lround(static_cast<double>(c) - v);
      if (x < 0 || x >= cols) continue;
      const auto ux = static_cast<std::size_t>(x);
      if (out.valid(r, ux) && out.values(r, ux) >= -v) continue;
      out.values(r, ux) = -v;
      out.valid(r, ux) = 1;
    }
  }
  return out;
}

std::optional<StereoTile> apply_shift(StereoTile t, double shift_limit) {
  const float m = min_valid(t.gt);
  if (m >= 0.0f) return t;
  if (-m >= shift_limit) return std::nullopt;
  const int s = static_cast<int>(std::ceil(-static_cast<double>(m)));
  t.right = shift_left(t.right, s);
  for (std::size_t i = 0; i < t.gt.values.size(); ++i) {
    if (t.gt.valid.data()[i]) t.gt.values.data()[i] += static_cast<float>(s);
  }
  t.shift_applied += s;
  return t;
}

}  // namespace

std::size_t tile_count(std::size_t scene_rows, std::size_t scene_cols, const TilingParams& p) {
  if (scene_rows < p.tile_rows || scene_cols < p.tile_cols) return 0;
  return ((scene_rows - p.tile_rows) / p.step + 1) * ((scene_cols - p.tile_cols) / p.step + 1);
}

std::vector<StereoTile> tile_scene(const ImageF& left, const ImageF& right, const DisparityMap& gt,
                                   const TilingParams& p) {
  if (p.step == 0 || p.tile_rows == 0 || p.tile_cols == 0) throw InvalidArgument("tile_scene: zero tile size or step");
  if (left.rows() != right.rows() || left.cols() != right.cols() || gt.rows() != left.rows() ||
      gt.cols() != left.cols()) {
    throw InvalidArgument("tile_scene: image and gt shapes differ");
  }
  if (left.rows() < p.tile_rows || left.cols() < p.tile_cols) throw InvalidArgument("tile_scene: scene smaller than a tile");
  std::vector<StereoTile> tiles;
  for (std::size_t r = 0; r + p.tile_rows <= left.rows(); r += p.step) {
    for (std::size_t c = 0; c + p.tile_cols <= left.cols(); c += p.step) {
      DisparityMap g(gt.values.crop(r, c, p.tile_rows, p.tile_cols), gt.valid.crop(r, c, p.tile_rows, p.tile_cols));
      if (g.density() < p.min_density) continue;
      tiles.push_back(StereoTile{left.crop(r, c, p.tile_rows, p.tile_cols), right.crop(r, c, p.tile_rows, p.tile_cols),
                                 std::move(g), r, c, 0, false});
    }
  }
  return tiles;
}

std::optional<StereoTile> canonicalize_pair(const StereoTile& tile, double shift_limit) {
  if (tile.gt.valid_count() == 0) throw InvalidArgument("canonicalize_pair: no valid ground truth");
  if (auto t = apply_shift(tile, shift_limit)) return t;
  StereoTile s = tile;
  std::swap(s.left, s.right);
  s.gt = reindex_to_right(tile.gt);
  s.flipped = !tile.flipped;
  if (s.gt.valid_count() == 0) return std::nullopt;
  return apply_shift(std::move(s), shift_limit);
}

ImageF normalize_image(const ImageF& img) {
  if (img.size() == 0) return img;
  double sum = 0.0;
  for (float v : img.pixels()) sum += v;
  const double mean = sum / static_cast<double>(img.size());
  double ss = 0.0;
  for (float v : img.pixels()) ss += (v - mean) * (v - mean);
  const double sd = std::max(std::sqrt(ss / static_cast<double>(img.size())), 1e-6);
  ImageF out(img.rows(), img.cols());
  for (std::size_t i = 0; i < img.size(); ++i) out.data()[i] = static_cast<float>((img.data()[i] - mean) / sd);
  return out;
}

std::vector<TileRecord> write_tiles(const std::filesystem::path& dir, const std::string& scene,
                                    const std::string& gt_kind, const std::vector<StereoTile>& tiles) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "tiles.jsonl", std::ios::app);
  if (!manifest) throw Error("write_tiles: cannot open manifest");
  std::vector<TileRecord> out;
  for (const auto& t : tiles) {
    const std::string stem = scene + "_r" + std::to_string(t.row) + "_c" + std::to_string(t.col);
    TileRecord rec{scene, t.row, t.col, t.shift_applied, t.flipped, t.density(), gt_kind,
                   stem + "_left.pfm", stem + "_right.pfm", stem + "_gt.pfm"};
    io::write_pfm(dir / rec.left, t.left);
    io::write_pfm(dir / rec.right, t.right);
    gt::write_disparity(dir / rec.gt, t.gt);
    nlohmann::json j{{"scene", rec.scene},           {"row", rec.row},         {"col", rec.col},
                     {"shift_applied", rec.shift_applied}, {"flipped", rec.flipped}, {"density", rec.density},
                     {"gt_kind", rec.gt_kind},       {"left", rec.left.string()}, {"right", rec.right.string()},
                     {"gt", rec.gt.string()}};
    manifest << j.dump() << '\n';
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TileRecord> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw FormatError("read_manifest: cannot open " + manifest.string());
  std::vector<TileRecord> out;
  std::string line;
  const auto base = manifest.parent_path();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back(TileRecord{j.at("scene"), j.at("row"), j.at("col"), j.at("shift_applied"), j.at("flipped"),
                               j.at("density"), j.at("gt_kind"), base / j.at("left").get<std::string>(),
                               base / j.at("right").get<std::string>(), base / j.at("gt").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("read_manifest: ") + e.what());
    }
  }
  return out;
}

StereoTile load_tile(const TileRecord& rec) {
  return StereoTile{io::read_pfm(rec.left), io::read_pfm(rec.right), gt::read_disparity(rec.gt),
                    rec.row,                rec.col,                rec.shift_applied,
                    rec.flipped};
}

}  // namespace satstereo::dataset
