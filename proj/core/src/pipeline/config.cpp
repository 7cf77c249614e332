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

#include "satstereo/pipeline/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>

#include "satstereo/io/hash.hpp"

namespace satstereo::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

fs::path existing(const fs::path& base, const json& v, const std::string& what) {
  if (!v.is_string()) throw ConfigError(what + ": expected a path string");
  fs::path p = v.get<std::string>();
  if (p.is_relative()) p = base / p;
  if (!fs::exists(p)) throw ConfigError(what + ": file not found: " + p.string());
  return p.lexically_normal();
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  return obj.contains(key) ? obj.at(key).get<T>() : fallback;
}

SceneConfig parse_scene(const json& j, const fs::path& base) {
  check_keys(j, {"images", "rpcs", "lidar", "truth_dsm", "ground_plane_alt", "bbox", "pairs"}, "scene");
  SceneConfig s;
  for (const auto& p : j.at("images")) s.images.push_back(existing(base, p, "scene.images"));
  for (const auto& p : j.at("rpcs")) s.rpcs.push_back(existing(base, p, "scene.rpcs"));
  if (s.images.size() < 2) throw ConfigError("scene.images: at least two images are required");
  if (s.rpcs.size() != s.images.size()) throw ConfigError("scene.rpcs: one RPC file per image is required");
  s.lidar = existing(base, j.at("lidar"), "scene.lidar");
  {
    fs::path sidecar = s.lidar;
    sidecar += ".json";
    if (!fs::exists(sidecar)) throw ConfigError("scene.lidar: sidecar not found: " + sidecar.string());
  }
  if (j.contains("truth_dsm") && !j.at("truth_dsm").is_null())
    s.truth_dsm = existing(base, j.at("truth_dsm"), "scene.truth_dsm");
  s.ground_plane_alt = get_or(j, "ground_plane_alt", 0.0);
  const auto& b = j.at("bbox");
  check_keys(b, {"lat_min", "lat_max", "lon_min", "lon_max", "alt_min", "alt_max"}, "scene.bbox");
  s.bbox = {b.at("lat_min").get<double>(), b.at("lat_max").get<double>(), b.at("lon_min").get<double>(),
            b.at("lon_max").get<double>(), b.at("alt_min").get<double>(), b.at("alt_max").get<double>()};
  if (!(s.bbox.lat_max > s.bbox.lat_min && s.bbox.lon_max > s.bbox.lon_min && s.bbox.alt_max >= s.bbox.alt_min))
    throw ConfigError("scene.bbox: empty or inverted box");
  if (j.contains("pairs")) {
    for (const auto& p : j.at("pairs")) {
      if (!p.is_array() || p.size() != 2) throw ConfigError("scene.pairs: each pair is [left, right]");
      s.pairs.emplace_back(p[0].get<std::size_t>(), p[1].get<std::size_t>());
    }
  } else {
    for (std::size_t a = 0; a < s.images.size(); ++a)
      for (std::size_t b2 = a + 1; b2 < s.images.size(); ++b2) s.pairs.emplace_back(a, b2);
  }
  if (s.pairs.empty()) throw ConfigError("scene.pairs: no pairs");
  for (const auto& [a, b2] : s.pairs) {
    if (a >= s.images.size() || b2 >= s.images.size() || a == b2)
      throw ConfigError("scene.pairs: index out of range or repeated");
  }
  return s;
}

sgm::SgmParams parse_sgm(const json& j) {
  check_keys(j, {"p1", "p2", "paths", "census_window", "max_disparity", "subpixel", "lr_check", "lr_tolerance",
                 "uniqueness", "speckle_size", "speckle_range"},
             "sgm");
  sgm::SgmParams p;
  p.p1 = get_or(j, "p1", p.p1);
  p.p2 = get_or(j, "p2", p.p2);
  p.paths = get_or(j, "paths", p.paths);
  p.census_window = get_or(j, "census_window", p.census_window);
  p.max_disparity = get_or(j, "max_disparity", p.max_disparity);
  p.subpixel = get_or(j, "subpixel", p.subpixel);
  p.lr_check = get_or(j, "lr_check", p.lr_check);
  p.lr_tolerance = get_or(j, "lr_tolerance", p.lr_tolerance);
  p.uniqueness = get_or(j, "uniqueness", p.uniqueness);
  p.speckle_size = get_or(j, "speckle_size", p.speckle_size);
  p.speckle_range = get_or(j, "speckle_range", p.speckle_range);
  p.validate();
  return p;
}

PipelineConfig parse_impl(const json& doc, const fs::path& base) {
  check_keys(doc,
             {"output_dir", "seed", "jobs", "scene", "rectify", "gt", "tiling", "matcher", "network", "train", "sgm",
              "dsm", "eval"},
             "config");
  PipelineConfig c;
  c.source = doc;
  fs::path out = doc.at("output_dir").get<std::string>();
  c.output_dir = (out.is_relative() ? base / out : out).lexically_normal();
  c.seed = get_or<std::uint64_t>(doc, "seed", 0);
  c.jobs = get_or<std::size_t>(doc, "jobs", 1);
  if (c.jobs == 0) throw ConfigError("jobs must be >= 1");
  c.scene = parse_scene(doc.at("scene"), base);

  if (doc.contains("rectify")) {
    const auto& j = doc.at("rectify");
    check_keys(j, {"n_points", "probe_height", "margin", "affine_grid"}, "rectify");
    c.rectify.n_points = get_or(j, "n_points", c.rectify.n_points);
    c.rectify.probe_height = get_or(j, "probe_height", c.rectify.probe_height);
    c.rectify.margin = get_or(j, "margin", c.rectify.margin);
    c.rectify.affine_grid = get_or(j, "affine_grid", c.rectify.affine_grid);
    if (c.rectify.affine_grid < 4) throw ConfigError("rectify.affine_grid must be >= 4");
  }
  if (doc.contains("gt")) {
    const auto& j = doc.at("gt");
    check_keys(j, {"kind", "bleed_tolerance", "bleed_radius"}, "gt");
    c.gt.kind = get_or(j, "kind", c.gt.kind);
    c.gt.bleed_tolerance = get_or(j, "bleed_tolerance", c.gt.bleed_tolerance);
    c.gt.bleed_radius = get_or(j, "bleed_radius", c.gt.bleed_radius);
    if (c.gt.kind != "sparse" && c.gt.kind != "dense") throw ConfigError("gt.kind must be sparse or dense");
    if (c.gt.bleed_radius < 1 || !(c.gt.bleed_tolerance >= 0.0)) throw ConfigError("gt: invalid bleed-through filter");
  }
  if (doc.contains("tiling")) {
    const auto& j = doc.at("tiling");
    check_keys(j, {"tile_rows", "tile_cols", "step", "min_density", "shift_limit"}, "tiling");
    auto& p = c.tiling.params;
    p.tile_rows = get_or(j, "tile_rows", p.tile_rows);
    p.tile_cols = get_or(j, "tile_cols", p.tile_cols);
    p.step = get_or(j, "step", p.step);
    p.min_density = get_or(j, "min_density", p.min_density);
    c.tiling.shift_limit = get_or(j, "shift_limit", c.tiling.shift_limit);
    if (p.tile_rows == 0 || p.tile_cols == 0 || p.step == 0) throw ConfigError("tiling: sizes must be positive");
  }
  const auto m = get_or<std::string>(doc, "matcher", "sgm");
  if (m != "sgm" && m != "net") throw ConfigError("matcher must be sgm or net");
  c.matcher = m == "net" ? Matcher::net : Matcher::sgm;
  if (doc.contains("network")) c.network = doc.at("network").get<net::NetworkConfig>();
  if (doc.contains("train")) {
    json j = doc.at("train");
    if (!j.is_object()) throw ConfigError("train: expected an object");
    c.train.steps = get_or(j, "steps", c.train.steps);
    c.train.dataset = get_or(j, "dataset", c.train.dataset);
    if (j.contains("checkpoint") && !j.at("checkpoint").is_null())
      c.train.checkpoint = existing(base, j.at("checkpoint"), "train.checkpoint");
    for (const char* k : {"steps", "dataset", "checkpoint"}) j.erase(k);
    check_keys(j,
               {"learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "loss_weights", "batch_size", "seed",
                "schedule"},
               "train");
    c.train.train = j.get<net::TrainConfig>();
  }
  if (c.train.train.loss_weights.size() != c.network.hourglass_count)
    throw ConfigError("train.loss_weights: one weight per hourglass output is required");
  if (doc.contains("sgm")) c.sgm = parse_sgm(doc.at("sgm"));
  if (doc.contains("dsm")) {
    const auto& j = doc.at("dsm");
    check_keys(j, {"cell_size", "fusion_bin"}, "dsm");
    c.dsm.cell_size = get_or(j, "cell_size", c.dsm.cell_size);
    c.dsm.fusion_bin = get_or(j, "fusion_bin", c.dsm.fusion_bin);
    if (!(c.dsm.cell_size > 0.0 && c.dsm.fusion_bin > 0.0)) throw ConfigError("dsm: sizes must be positive");
  }
  if (doc.contains("eval")) {
    const auto& j = doc.at("eval");
    check_keys(j, {"bad_thresholds"}, "eval");
    c.eval.bad_thresholds = get_or(j, "bad_thresholds", c.eval.bad_thresholds);
  }
  return c;
}

}  // namespace

PipelineConfig parse_config(const json& doc, const fs::path& base_dir) {
  try {
    return parse_impl(doc, base_dir);
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + assignment + "': empty key component");
    if (!node->is_object()) throw ConfigError("override '" + assignment + "': '" + part + "' is not inside an object");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(doc, fs::absolute(path).parent_path());
}

std::string config_hash(const PipelineConfig& cfg) { return io::sha256_hex(cfg.source.dump()); }

std::uint64_t derive_seed(std::uint64_t root, const std::string& stage) {
  // FNV-1a of the name, then one splitmix64 round.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : stage) h = (h ^ ch) * 1099511628211ull;
  std::uint64_t z = root + 0x9e3779b97f4a7c15ull * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string to_string(Matcher m) { return m == Matcher::net ? "net" : "sgm"; }

}  // namespace satstereo::pipeline
