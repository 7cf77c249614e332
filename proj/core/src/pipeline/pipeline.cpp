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

#include "satstereo/pipeline/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "satstereo/dataset/tiles.hpp"
#include "satstereo/dsm/dsm.hpp"
#include "satstereo/geo/camera.hpp"
#include "satstereo/gt/ground_truth.hpp"
#include "satstereo/io/hash.hpp"
#include "satstereo/io/pnm.hpp"
#include "satstereo/net/network.hpp"
#include "satstereo/net/train.hpp"
#include "satstereo/pipeline/eval.hpp"
#include "satstereo/pipeline/synthetic.hpp"
#include "satstereo/sgm/sgm.hpp"

namespace satstereo::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kStageNames[] = {"rectify", "gen-gt", "tile", "train", "infer", "sgm", "dsm", "fuse", "eval"};

// Runs fn(0..n-1) on up to `jobs` threads; the first exception wins.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

template <int R, int C>
Eigen::Matrix<double, R, C> matrix_from(const json& j) {
  Eigen::Matrix<double, R, C> m;
  if (!j.is_array() || j.size() != R) throw FormatError("geometry: bad matrix");
  for (int r = 0; r < R; ++r) {
    if (!j[r].is_array() || j[r].size() != C) throw FormatError("geometry: bad matrix");
    for (int c = 0; c < C; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json camera_json(const geo::AffineCamera& cam) {
  const auto& o = cam.local_origin();
  return {{"matrix", matrix_json(cam.matrix())}, {"origin", {o.lat, o.lon, o.alt}}};
}

geo::AffineCamera camera_from(const json& j) {
  const auto& o = j.at("origin");
  return geo::AffineCamera(matrix_from<2, 4>(j.at("matrix")),
                           {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()});
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw FormatError(path.string() + " is not valid JSON");
  return j;
}

fs::path mask_path(const fs::path& pfm) {
  fs::path p = pfm;
  p += ".valid.pgm";
  return p;
}

// Removes and recreates a stage's output directory so reruns start clean.
void fresh_dir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
}

struct Layout {
  fs::path root;
  fs::path rectified(const std::string& id) const { return root / "rectified" / id; }
  fs::path gt(const std::string& id) const { return root / "gt" / id; }
  fs::path dataset() const { return root / "dataset"; }
  fs::path model() const { return root / "model"; }
  fs::path disparity(const std::string& id) const { return root / "disparity" / id; }
  fs::path dsm() const { return root / "dsm"; }
  fs::path eval() const { return root / "eval"; }
  fs::path manifest() const { return root / "manifest.json"; }
};

fs::path gt_file(const Layout& l, const std::string& id, const std::string& kind) {
  return l.gt(id) / (kind == "dense" ? "dense.pfm" : "cleaned.pfm");
}

struct Plan {
  std::uint64_t seed = 0;
  json settings;
  std::vector<fs::path> inputs;
  std::function<std::vector<fs::path>()> run;
};

std::vector<std::string> pair_ids(const PipelineConfig& cfg) {
  std::vector<std::string> ids;
  for (const auto& p : cfg.scene.pairs) ids.push_back(pair_id(p));
  return ids;
}

ImageF load_image(const fs::path& p) { return io::to_float(io::read_pgm(p)); }

DisparityMap with_mask(DisparityMap d, const Mask& m) {
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    if (!m.data()[i]) {
      d.valid.data()[i] = 0;
      d.values.data()[i] = 0.0f;
    }
  }
  return d;
}

std::pair<int, geo::Hemisphere> scene_zone(const PipelineConfig& cfg) {
  const auto u = geo::wgs84_to_utm(cfg.scene.bbox.center());
  return {u.zone, u.hemisphere};
}

std::size_t head_count(const PipelineConfig& cfg) { return cfg.train.train.loss_weights.size(); }

net::StereoNet make_net(const PipelineConfig& cfg) {
  return net::StereoNet(cfg.network, derive_seed(cfg.seed, "network"));
}

// ------------------------------------------------------------------ stages

Plan plan_rectify(const PipelineConfig& cfg, const Layout& L, std::uint64_t seed) {
  Plan p;
  p.seed = seed;
  p.settings = {{"scene", cfg.source.at("scene")}, {"rectify", cfg.source.value("rectify", json::object())}};
  for (std::size_t k = 0; k < cfg.scene.images.size(); ++k) {
    p.inputs.push_back(cfg.scene.images[k]);
    p.inputs.push_back(cfg.scene.rpcs[k]);
  }
  p.run = [&cfg, L, seed] {
    const auto& sc = cfg.scene;
    geo::AffineFitOptions fit_opts;
    fit_opts.grid_per_axis = cfg.rectify.affine_grid;
    std::vector<geo::AffineFit> fits(sc.images.size());
    parallel_for(sc.images.size(), cfg.jobs,
                 [&](std::size_t k) { fits[k] = geo::fit_affine_camera(geo::read_rpc(sc.rpcs[k]), sc.bbox, fit_opts); });
    std::vector<rectify::RectifiedPair> pairs(sc.pairs.size());
    parallel_for(sc.pairs.size(), cfg.jobs, [&](std::size_t k) {
      const auto [a, b] = sc.pairs[k];
      rectify::RectificationParams rp;
      rp.ground_plane_alt = sc.ground_plane_alt;
      rp.scene_bbox = sc.bbox;
      rp.n_points = cfg.rectify.n_points;
      rp.probe_height = cfg.rectify.probe_height;
      rp.seed = derive_seed(seed, pair_id(sc.pairs[k]));
      pairs[k] = rectify::rectify_pair(load_image(sc.images[a]), load_image(sc.images[b]), fits[a].camera,
                                       fits[b].camera, rp, cfg.rectify.margin);
    });
    fs::remove_all(L.root / "rectified");
    std::vector<fs::path> out;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto& r = pairs[k];
      const auto [a, b] = sc.pairs[k];
      const auto dir = L.rectified(pair_id(sc.pairs[k]));
      fs::create_directories(dir);
      io::write_pfm(dir / "left.pfm", r.left);
      io::write_pfm(dir / "right.pfm", r.right);
      io::write_mask_pgm(dir / "left_valid.pgm", r.left_valid);
      io::write_mask_pgm(dir / "right_valid.pgm", r.right_valid);
      write_geometry(dir / "geometry.json", r.geometry(),
                     {{"seed", r.seed},
                      {"left_image", a},
                      {"right_image", b},
                      {"affine_fit_residual_px", {fits[a].max_residual_px, fits[b].max_residual_px}}});
      for (const char* f : {"left.pfm", "right.pfm", "left_valid.pgm", "right_valid.pgm", "geometry.json"})
        out.push_back(dir / f);
    }
    return out;
  };
  return p;
}

Plan plan_gen_gt(const PipelineConfig& cfg, const Layout& L, std::uint64_t seed) {
  Plan p;
  p.seed = seed;
  p.settings = {{"gt", cfg.source.value("gt", json::object())}};
  p.inputs.push_back(cfg.scene.lidar);
  {
    fs::path side = cfg.scene.lidar;
    side += ".json";
    p.inputs.push_back(side);
  }
  for (const auto& id : pair_ids(cfg)) {
    p.inputs.push_back(L.rectified(id) / "geometry.json");
    p.inputs.push_back(L.rectified(id) / "left_valid.pgm");
  }
  p.run = [&cfg, L] {
    const auto lidar = gt::read_lidar(cfg.scene.lidar);
    const auto ids = pair_ids(cfg);
    struct Out {
      SparseDisparity sparse, cleaned;
      DenseDisparity dense;
    };
    std::vector<Out> res(ids.size());
    parallel_for(ids.size(), cfg.jobs, [&](std::size_t k) {
      const auto geom = read_geometry(L.rectified(ids[k]) / "geometry.json");
      const Mask valid = io::read_mask_pgm(L.rectified(ids[k]) / "left_valid.pgm");
      const auto sp = gt::build_sparse_disparity(lidar, geom);
      res[k].sparse = sp.disparity;
      res[k].cleaned = gt::remove_bleedthrough(sp.disparity, sp.altitude, cfg.gt.bleed_tolerance, cfg.gt.bleed_radius);
      res[k].dense = with_mask(gt::densify_disparity(res[k].cleaned), valid);
    });
    fs::remove_all(L.root / "gt");
    std::vector<fs::path> out;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto dir = L.gt(ids[k]);
      fs::create_directories(dir);
      const std::pair<const char*, const DisparityMap*> files[] = {
          {"sparse.pfm", &res[k].sparse}, {"cleaned.pfm", &res[k].cleaned}, {"dense.pfm", &res[k].dense}};
      for (const auto& [name, map] : files) {
        gt::write_disparity(dir / name, *map);
        out.push_back(dir / name);
        out.push_back(mask_path(dir / name));
      }
      write_json(dir / "summary.json", {{"sparse_valid", res[k].sparse.valid_count()},
                                        {"cleaned_valid", res[k].cleaned.valid_count()},
                                        {"dense_valid", res[k].dense.valid_count()},
                                        {"pixels", res[k].dense.values.size()}});
      out.push_back(dir / "summary.json");
    }
    return out;
  };
  return p;
}

Plan plan_tile(const PipelineConfig& cfg, const Layout& L, std::uint64_t seed) {
  Plan p;
  p.seed = seed;
  p.settings = {{"tiling", cfg.source.value("tiling", json::object())}, {"gt_kind", cfg.gt.kind}};
  for (const auto& id : pair_ids(cfg)) {
    p.inputs.push_back(L.rectified(id) / "left.pfm");
    p.inputs.push_back(L.rectified(id) / "right.pfm");
    p.inputs.push_back(gt_file(L, id, cfg.gt.kind));
    p.inputs.push_back(mask_path(gt_file(L, id, cfg.gt.kind)));
  }
  p.run = [&cfg, L] {
    fresh_dir(L.dataset());
    json summary = json::array();
    std::size_t kept_total = 0;
    for (const auto& id : pair_ids(cfg)) {
      const auto left = io::read_pfm(L.rectified(id) / "left.pfm");
      const auto right = io::read_pfm(L.rectified(id) / "right.pfm");
      const auto gtd = gt::read_disparity(gt_file(L, id, cfg.gt.kind));
      const auto dense_enough = dataset::tile_scene(left, right, gtd, cfg.tiling.params);
      std::vector<dataset::StereoTile> kept;
      for (const auto& t : dense_enough) {
        if (auto c = dataset::canonicalize_pair(t, cfg.tiling.shift_limit)) kept.push_back(std::move(*c));
      }
      dataset::write_tiles(L.dataset(), id, cfg.gt.kind, kept);
      kept_total += kept.size();
      summary.push_back({{"pair", id},
                         {"windows", dataset::tile_count(left.rows(), left.cols(), cfg.tiling.params)},
                         {"dense_enough", dense_enough.size()},
                         {"kept", kept.size()}});
    }
    if (kept_total == 0) throw EmptyResult("no tile passed the density filter and canonicalization");
    write_json(L.dataset() / "summary.json", summary);
    std::vector<fs::path> out{L.dataset() / "tiles.jsonl", L.dataset() / "summary.json"};
    for (const auto& rec : dataset::read_manifest(L.dataset() / "tiles.jsonl")) {
      for (const auto& f : {rec.left, rec.right, rec.gt}) out.push_back(L.dataset() / f);
      out.push_back(mask_path(L.dataset() / rec.gt));
    }
    return out;
  };
  return p;
}

Plan plan_train(const PipelineConfig& cfg, const Layout& L, std::uint64_t seed) {
  Plan p;
  p.seed = seed;
  p.settings = {{"network", cfg.network},
                {"train", cfg.source.value("train", json::object())},
                {"network_seed", derive_seed(cfg.seed, "network")}};
  if (cfg.train.checkpoint) {
    p.inputs.push_back(*cfg.train.checkpoint);
  } else {
    p.inputs.push_back(L.dataset() / "tiles.jsonl");
    if (fs::exists(L.dataset() / "tiles.jsonl")) {
      for (const auto& rec : dataset::read_manifest(L.dataset() / "tiles.jsonl"))
        for (const auto& f : {rec.left, rec.right, rec.gt}) p.inputs.push_back(L.dataset() / f);
    }
  }
  p.run = [&cfg, L, seed] {
    auto net = make_net(cfg);
    std::vector<net::LossRecord> trace;
    net::TrainConfig tc = cfg.train.train;
    tc.seed = seed;
    if (cfg.train.checkpoint) {
      net::load_checkpoint(*cfg.train.checkpoint, net.params());
    } else {
      std::vector<dataset::StereoTile> tiles;
      for (const auto& rec : dataset::read_manifest(L.dataset() / "tiles.jsonl")) {
        auto t = dataset::load_tile(rec);
        t.left = dataset::normalize_image(t.left);
        t.right = dataset::normalize_image(t.right);
        tiles.push_back(std::move(t));
      }
      if (tiles.empty()) throw EmptyResult("no training tiles");
      if (tc.schedule.empty()) {
        trace = net::train(net, tiles, tc, cfg.train.steps);
      } else {
        std::map<std::string, std::vector<dataset::StereoTile>> sets{{cfg.train.dataset, std::move(tiles)}};
        trace = net::train_schedule(net, sets, tc);
      }
    }
    fresh_dir(L.model());
    net::save_checkpoint(L.model() / "checkpoint.bin", net.params());
    write_json(L.model() / "model.json", {{"network", cfg.network},
                                          {"train", tc},
                                          {"dataset", cfg.train.dataset},
                                          {"steps", trace.size()},
                                          {"loaded_from_checkpoint", cfg.train.checkpoint.has_value()},
                                          {"network_seed", derive_seed(cfg.seed, "network")}});
    std::ofstream csv(L.model() / "loss.csv");
    csv << "step";
    for (std::size_t k = 0; k < tc.loss_weights.size(); ++k) csv << ",loss" << (k + 1);
    csv << ",weighted\n" << std::setprecision(9);
    for (const auto& r : trace) {
      csv << r.step;
      for (double l : r.losses) csv << ',' << l;
      csv << ',' << r.total << '\n';
    }
    csv.close();
    return std::vector<fs::path>{L.model() / "checkpoint.bin", L.model() / "model.json", L.model() / "loss.csv"};
  };
  return p;
}

std::vector<fs::path> write_predictions(const PipelineConfig& cfg, const Layout& L,
                                        const std::vector<std::vector<DisparityMap>>& heads) {
  fs::remove_all(L.root / "disparity");
  std::vector<fs::path> out;
  const auto ids = pair_ids(cfg);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto dir = L.disparity(ids[k]);
    fs::create_directories(dir);
    gt::write_disparity(dir / "disparity.pfm", heads[k].back());
    out.push_back(dir / "disparity.pfm");
    out.push_back(mask_path(dir / "disparity.pfm"));
    for (std::size_t h = 0; h < heads[k].size(); ++h) {
      const auto f = dir / ("reg" + std::to_string(h) + ".pfm");
      gt::write_disparity(f, heads[k][h]);
      out.push_back(f);
      out.push_back(mask_path(f));
    }
  }
  return out;
}

void add_rectified_inputs(Plan& p, const PipelineConfig& cfg, const Layout& L) {
  for (const auto& id : pair_ids(cfg))
    for (const char* f : {"left.pfm", "right.pfm", "left_valid.pgm"}) p.inputs.push_back(L.rectified(id) / f);
}

Plan plan_infer(const PipelineConfig& cfg, const Layout& L, std::uint64_t seed) {
  Plan p;
  p.seed = seed;
  p.settings = {{"network", cfg.network}};
  p.inputs.push_back(L.model() / "checkpoint.bin");
  add_rectified_inputs(p, cfg, L);
  p.run = [&cfg, L] {
    auto net = make_net(cfg);
    net::load_checkpoint(L.model() / "checkpoint.bin", net.params());
    const auto ids = pair_ids(cfg);
    std::vector<std::vector<DisparityMap>> heads(ids.size());
    parallel_for(ids.size(), cfg.jobs, [&](std::size_t k) {
      const auto dir = L.rectified(ids[k]);
      const auto res = net::infer_disparity(net, io::read_pfm(dir / "left.pfm"), io::read_pfm(dir / "right.pfm"));
      const Mask valid = io::read_mask_pgm(dir / "left_valid.pgm");
      for (const auto& r : res.regressions) heads[k].push_back(with_mask(r, valid));
    });
    return write_predictions(cfg, L, heads);
  };
  return p;
}

Plan plan_sgm(const PipelineConfig& cfg, const Layout& L, std::uint64_t seed) {
  Plan p;
  p.seed = seed;
  p.settings = {{"sgm", cfg.source.value("sgm", json::object())}, {"heads", head_count(cfg)}};
  add_rectified_inputs(p, cfg, L);
  p.run = [&cfg, L] {
    const auto ids = pair_ids(cfg);
    std::vector<std::vector<DisparityMap>> heads(ids.size());
    parallel_for(ids.size(), cfg.jobs, [&](std::size_t k) {
      const auto dir = L.rectified(ids[k]);
      const auto d = with_mask(
          sgm::sgm_disparity(io::read_pfm(dir / "left.pfm"), io::read_pfm(dir / "right.pfm"), cfg.sgm),
          io::read_mask_pgm(dir / "left_valid.pgm"));
      // One estimate stands in for every regression head.
      heads[k].assign(head_count(cfg), d);
    });
    return write_predictions(cfg, L, heads);
  };
  return p;
}

Plan plan_dsm(const PipelineConfig& cfg, const Layout& L, std::uint64_t seed) {
  Plan p;
  p.seed = seed;
  p.settings = {{"cell_size", cfg.dsm.cell_size}, {"bbox", cfg.source.at("scene").at("bbox")}};
  for (const auto& id : pair_ids(cfg)) {
    p.inputs.push_back(L.disparity(id) / "disparity.pfm");
    p.inputs.push_back(mask_path(L.disparity(id) / "disparity.pfm"));
    p.inputs.push_back(L.rectified(id) / "geometry.json");
  }
  p.run = [&cfg, L] {
    const auto grid = scene_grid(cfg.scene.bbox, cfg.dsm.cell_size);
    const auto ids = pair_ids(cfg);
    std::vector<dsm::PairwiseDsm> dsms(ids.size());
    std::vector<std::size_t> skipped(ids.size()), points(ids.size());
    parallel_for(ids.size(), cfg.jobs, [&](std::size_t k) {
      const auto tri = dsm::triangulate_pair(gt::read_disparity(L.disparity(ids[k]) / "disparity.pfm"),
                                             read_geometry(L.rectified(ids[k]) / "geometry.json"));
      dsms[k] = dsm::rasterize_dsm(tri.points, grid, ids[k]);
      skipped[k] = tri.skipped;
      points[k] = tri.points.size();
    });
    fresh_dir(L.dsm());
    std::vector<fs::path> out;
    json summary = json::array();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto f = L.dsm() / (ids[k] + ".asc");
      dsm::write_esri_ascii(f, grid, dsms[k].elevations);
      out.push_back(f);
      summary.push_back({{"pair", ids[k]}, {"points", points[k]}, {"skipped", skipped[k]}});
    }
    write_json(L.dsm() / "pairs.json", summary);
    out.push_back(L.dsm() / "pairs.json");
    return out;
  };
  return p;
}

Plan plan_fuse(const PipelineConfig& cfg, const Layout& L, std::uint64_t seed) {
  Plan p;
  p.seed = seed;
  p.settings = {{"fusion_bin", cfg.dsm.fusion_bin}};
  for (const auto& id : pair_ids(cfg)) p.inputs.push_back(L.dsm() / (id + ".asc"));
  p.run = [&cfg, L] {
    const auto [zone, hemi] = scene_zone(cfg);
    std::vector<dsm::PairwiseDsm> dsms;
    for (const auto& id : pair_ids(cfg)) {
      auto g = dsm::read_esri_ascii(L.dsm() / (id + ".asc"), zone, hemi);
      dsm::PairwiseDsm d{g.grid, std::move(g.elevations), Raster<std::uint32_t>(g.grid.rows, g.grid.cols, 0), id};
      for (std::size_t i = 0; i < d.elevations.size(); ++i)
        d.counts.data()[i] = std::isfinite(d.elevations.data()[i]) ? 1 : 0;
      dsms.push_back(std::move(d));
    }
    const auto fused = dsm::fuse_dsms(dsms, cfg.dsm.fusion_bin);
    const auto f = L.dsm() / "fused.asc";
    dsm::write_esri_ascii(f, fused.grid, fused.elevations);
    return std::vector<fs::path>{f};
  };
  return p;
}

Plan plan_eval(const PipelineConfig& cfg, const Layout& L, std::uint64_t seed) {
  Plan p;
  p.seed = seed;
  p.settings = {{"eval", cfg.source.value("eval", json::object())},
                {"weights", cfg.train.train.loss_weights},
                {"gt_kind", cfg.gt.kind},
                {"matcher", to_string(cfg.matcher)}};
  for (const auto& id : pair_ids(cfg)) {
    for (std::size_t h = 0; h < head_count(cfg); ++h) {
      const auto f = L.disparity(id) / ("reg" + std::to_string(h) + ".pfm");
      p.inputs.push_back(f);
      p.inputs.push_back(mask_path(f));
    }
    p.inputs.push_back(gt_file(L, id, cfg.gt.kind));
    p.inputs.push_back(mask_path(gt_file(L, id, cfg.gt.kind)));
  }
  p.inputs.push_back(L.dsm() / "fused.asc");
  if (cfg.scene.truth_dsm) p.inputs.push_back(*cfg.scene.truth_dsm);
  p.run = [&cfg, L] {
    std::vector<PairPrediction> preds;
    std::vector<DisparityMap> gts;
    for (const auto& id : pair_ids(cfg)) {
      PairPrediction pp{id, {}};
      for (std::size_t h = 0; h < head_count(cfg); ++h)
        pp.regressions.push_back(gt::read_disparity(L.disparity(id) / ("reg" + std::to_string(h) + ".pfm")));
      preds.push_back(std::move(pp));
      gts.push_back(gt::read_disparity(gt_file(L, id, cfg.gt.kind)));
    }
    auto rep = eval_report(preds, gts, cfg.train.train.loss_weights, cfg.eval.bad_thresholds);
    if (cfg.scene.truth_dsm) {
      const auto [zone, hemi] = scene_zone(cfg);
      const auto fused = dsm::read_esri_ascii(L.dsm() / "fused.asc", zone, hemi);
      const auto truth = dsm::read_esri_ascii(*cfg.scene.truth_dsm, zone, hemi);
      rep.dsm = compare_dsm(fused.grid, fused.elevations, truth.grid, truth.elevations);
      rep.has_dsm = true;
    }
    fresh_dir(L.eval());
    json j = to_json(rep);
    j["matcher"] = to_string(cfg.matcher);
    j["gt_kind"] = cfg.gt.kind;
    j["root_seed"] = cfg.seed;
    write_json(L.eval() / "report.json", j);
    std::ofstream txt(L.eval() / "report.txt");
    txt << "# matcher " << to_string(cfg.matcher) << ", ground truth " << cfg.gt.kind << ", root seed " << cfg.seed
        << '\n'
        << to_text(rep);
    txt.close();
    return std::vector<fs::path>{L.eval() / "report.json", L.eval() / "report.txt"};
  };
  return p;
}

Plan make_plan(const PipelineConfig& cfg, const Layout& L, Stage s) {
  const std::uint64_t seed = derive_seed(cfg.seed, stage_name(s));
  switch (s) {
    case Stage::rectify: return plan_rectify(cfg, L, seed);
    case Stage::gen_gt: return plan_gen_gt(cfg, L, seed);
    case Stage::tile: return plan_tile(cfg, L, seed);
    case Stage::train: return plan_train(cfg, L, seed);
    case Stage::infer: return plan_infer(cfg, L, seed);
    case Stage::sgm: return plan_sgm(cfg, L, seed);
    case Stage::dsm: return plan_dsm(cfg, L, seed);
    case Stage::fuse: return plan_fuse(cfg, L, seed);
    case Stage::eval: return plan_eval(cfg, L, seed);
  }
  throw InvalidArgument("unknown stage");
}

std::string rel(const fs::path& p, const fs::path& root) {
  const auto r = p.lexically_relative(root);
  if (!r.empty() && *r.begin() != "..") return r.generic_string();
  return p.generic_string();
}

std::vector<FileHash> hash_files(const std::vector<fs::path>& files, const fs::path& root) {
  std::vector<FileHash> out;
  for (const auto& f : files) out.push_back({rel(f, root), io::sha256_file(f)});
  return out;
}

bool outputs_intact(const StageRecord& rec, const fs::path& root) {
  if (rec.outputs.empty()) return false;
  for (const auto& o : rec.outputs) {
    fs::path p = o.path;
    if (p.is_relative()) p = root / p;
    if (!fs::exists(p) || io::sha256_file(p) != o.sha256) return false;
  }
  return true;
}

}  // namespace

std::string stage_name(Stage s) { return kStageNames[static_cast<int>(s)]; }

std::optional<Stage> parse_stage(const std::string& name) {
  for (int k = 0; k < 9; ++k)
    if (name == kStageNames[k]) return static_cast<Stage>(k);
  return std::nullopt;
}

std::vector<Stage> pipeline_stages(Matcher m) {
  return {Stage::rectify, Stage::gen_gt, Stage::tile, Stage::train, m == Matcher::net ? Stage::infer : Stage::sgm,
          Stage::dsm,     Stage::fuse,   Stage::eval};
}

std::string pair_id(const std::pair<std::size_t, std::size_t>& p) {
  return "pair_" + std::to_string(p.first) + "_" + std::to_string(p.second);
}

void write_geometry(const fs::path& path, const rectify::PairGeometry& g, const json& extra) {
  json j = extra;
  j["camera_a"] = camera_json(g.camera_a);
  j["camera_b"] = camera_json(g.camera_b);
  j["h_a"] = matrix_json(g.h_a.matrix());
  j["h_b"] = matrix_json(g.h_b.matrix());
  j["rows"] = g.rows;
  j["cols"] = g.cols;
  write_json(path, j);
}

rectify::PairGeometry read_geometry(const fs::path& path) {
  const json j = read_json(path);
  try {
    return {camera_from(j.at("camera_a")),
            camera_from(j.at("camera_b")),
            rectify::Homography(matrix_from<3, 3>(j.at("h_a"))),
            rectify::Homography(matrix_from<3, 3>(j.at("h_b"))),
            j.at("rows").get<std::size_t>(),
            j.at("cols").get<std::size_t>()};
  } catch (const json::exception& e) {
    throw FormatError("geometry " + path.string() + ": " + e.what());
  }
}

const StageRecord* Manifest::find(const std::string& stage) const {
  for (const auto& s : stages)
    if (s.stage == stage) return &s;
  return nullptr;
}

namespace {

json files_json(const std::vector<FileHash>& fs_) {
  json a = json::array();
  for (const auto& f : fs_) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
  return a;
}

std::vector<FileHash> files_from(const json& a) {
  std::vector<FileHash> out;
  for (const auto& f : a) out.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
  return out;
}

}  // namespace

json to_json(const Manifest& m) {
  json stages = json::array();
  for (const auto& s : m.stages) {
    stages.push_back({{"stage", s.stage},
                      {"key", s.key},
                      {"seed", s.seed},
                      {"inputs", files_json(s.inputs)},
                      {"outputs", files_json(s.outputs)},
                      {"wall_time_s", s.wall_time_s},
                      {"resumed", s.resumed}});
  }
  return {{"root_seed", m.root_seed}, {"config_hash", m.config_hash}, {"matcher", m.matcher}, {"stages", stages}};
}

Manifest manifest_from_json(const json& j) {
  try {
    Manifest m;
    m.root_seed = j.at("root_seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.matcher = j.value("matcher", std::string());
    for (const auto& s : j.at("stages")) {
      StageRecord r;
      r.stage = s.at("stage").get<std::string>();
      r.key = s.at("key").get<std::string>();
      r.seed = s.at("seed").get<std::uint64_t>();
      r.inputs = files_from(s.at("inputs"));
      r.outputs = files_from(s.at("outputs"));
      r.wall_time_s = s.at("wall_time_s").get<double>();
      r.resumed = s.value("resumed", false);
      m.stages.push_back(std::move(r));
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

Manifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) return {};
  return manifest_from_json(read_json(path));
}

void write_manifest(const fs::path& path, const Manifest& m) { write_json(path, to_json(m)); }

StageRecord run_stage(const PipelineConfig& cfg, Stage stage, const RunOptions& opts) {
  const Layout L{cfg.output_dir};
  const std::string name = stage_name(stage);
  auto log = [&](const std::string& msg) {
    if (opts.log) opts.log(msg);
  };
  try {
    fs::create_directories(L.root);
    Manifest man = read_manifest(L.manifest());
    man.root_seed = cfg.seed;
    man.config_hash = config_hash(cfg);
    man.matcher = to_string(cfg.matcher);

    Plan plan = make_plan(cfg, L, stage);
    for (const auto& in : plan.inputs) {
      if (!fs::exists(in)) throw Error("missing input " + in.string());
    }
    StageRecord rec;
    rec.stage = name;
    rec.seed = plan.seed;
    rec.inputs = hash_files(plan.inputs, L.root);
    rec.key = io::sha256_hex(
        json{{"stage", name}, {"seed", plan.seed}, {"settings", plan.settings}, {"inputs", files_json(rec.inputs)}}
            .dump());

    if (const auto* prev = man.find(name); !opts.force && prev && prev->key == rec.key && outputs_intact(*prev, L.root)) {
      rec = *prev;
      rec.resumed = true;
      log(name + ": up to date");
    } else {
      log(name + ": running");
      const auto t0 = std::chrono::steady_clock::now();
      const auto outputs = plan.run();
      rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rec.outputs = hash_files(outputs, L.root);
      log(name + ": done in " + std::to_string(rec.wall_time_s) + " s");
    }
    // The two matchers write the same files; only the last one is current.
    std::erase_if(man.stages, [&](const StageRecord& s) {
      return s.stage == name || (stage == Stage::infer && s.stage == "sgm") ||
             (stage == Stage::sgm && s.stage == "infer");
    });
    man.stages.push_back(rec);
    std::stable_sort(man.stages.begin(), man.stages.end(), [](const StageRecord& a, const StageRecord& b) {
      return *parse_stage(a.stage) < *parse_stage(b.stage);
    });
    write_manifest(L.manifest(), man);
    return rec;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

Manifest run_pipeline(const PipelineConfig& cfg, const RunOptions& opts) {
  for (Stage s : pipeline_stages(cfg.matcher)) run_stage(cfg, s, opts);
  return read_manifest(cfg.output_dir / "manifest.json");
}

}  // namespace satstereo::pipeline
