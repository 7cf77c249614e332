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

#include "satstereo/pipeline/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "satstereo/common/error.hpp"

namespace satstereo::pipeline {

namespace {

double smooth_l1(double e) {
  const double a = std::abs(e);
  return a < 1.0 ? 0.5 * a * a : a - 0.5;
}

// Running sums; pooled metrics come from merging per-pair accumulators.
struct Accum {
  std::vector<double> loss;
  double abs_err = 0.0;
  std::vector<std::size_t> bad;
  std::size_t pixels = 0;
  std::size_t gt_pixels = 0;

  Accum(std::size_t heads, std::size_t thresholds) : loss(heads, 0.0), bad(thresholds, 0) {}

  void merge(const Accum& o) {
    for (std::size_t k = 0; k < loss.size(); ++k) loss[k] += o.loss[k];
    for (std::size_t k = 0; k < bad.size(); ++k) bad[k] += o.bad[k];
    abs_err += o.abs_err;
    pixels += o.pixels;
    gt_pixels += o.gt_pixels;
  }

  DisparityMetrics finish(const std::string& name, const std::vector<double>& weights,
                          const std::vector<double>& thresholds) const {
    DisparityMetrics m;
    m.name = name;
    m.pixels = pixels;
    m.gt_pixels = gt_pixels;
    const double n = static_cast<double>(pixels);
    for (std::size_t k = 0; k < loss.size(); ++k) {
      m.regression_losses.push_back(pixels ? loss[k] / n : 0.0);
      m.weighted += weights[k] * m.regression_losses.back();
    }
    m.epe = pixels ? abs_err / n : 0.0;
    for (std::size_t k = 0; k < bad.size(); ++k)
      m.bad.push_back({thresholds[k], pixels ? 100.0 * static_cast<double>(bad[k]) / n : 0.0});
    return m;
  }
};

}  // namespace

EvalReport eval_report(std::span<const PairPrediction> preds, std::span<const DisparityMap> gts,
                       const std::vector<double>& weights, const std::vector<double>& bad_thresholds) {
  if (preds.empty()) throw EmptyResult("eval_report: no predictions");
  if (preds.size() != gts.size()) throw InvalidArgument("eval_report: prediction and ground-truth lists differ");
  if (weights.empty()) throw InvalidArgument("eval_report: no loss weights");
  EvalReport rep;
  rep.weights = weights;
  Accum total(weights.size(), bad_thresholds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    const auto& gt = gts[i];
    if (p.regressions.size() != weights.size())
      throw InvalidArgument("eval_report: " + p.name + " has " + std::to_string(p.regressions.size()) +
                            " regressions, expected " + std::to_string(weights.size()));
    for (const auto& r : p.regressions)
      if (r.rows() != gt.rows() || r.cols() != gt.cols())
        throw InvalidArgument("eval_report: " + p.name + " prediction and ground truth differ in shape");
    Accum acc(weights.size(), bad_thresholds.size());
    for (std::size_t y = 0; y < gt.rows(); ++y)
      for (std::size_t x = 0; x < gt.cols(); ++x) {
        const float g = gt.values(y, x);
        if (!gt.valid(y, x) || !std::isfinite(g)) continue;
        ++acc.gt_pixels;
        bool ok = true;
        for (const auto& r : p.regressions) ok = ok && r.valid(y, x) && std::isfinite(r.values(y, x));
        if (!ok) continue;
        ++acc.pixels;
        for (std::size_t k = 0; k < weights.size(); ++k)
          acc.loss[k] += smooth_l1(static_cast<double>(p.regressions[k].values(y, x)) - g);
        const double e = std::abs(static_cast<double>(p.regressions.back().values(y, x)) - g);
        acc.abs_err += e;
        for (std::size_t k = 0; k < bad_thresholds.size(); ++k) acc.bad[k] += e > bad_thresholds[k] ? 1 : 0;
      }
    rep.pairs.push_back(acc.finish(p.name, weights, bad_thresholds));
    total.merge(acc);
  }
  if (total.pixels == 0) throw EmptyResult("eval_report: no pixel has both a prediction and ground truth");
  rep.overall = total.finish("all", weights, bad_thresholds);
  return rep;
}

DsmMetrics compare_dsm(const dsm::DsmGrid& grid, const ImageF& dsm, const dsm::DsmGrid& truth_grid,
                       const ImageF& truth) {
  if (dsm.rows() != grid.rows || dsm.cols() != grid.cols || truth.rows() != truth_grid.rows ||
      truth.cols() != truth_grid.cols)
    throw InvalidArgument("compare_dsm: raster does not match its grid");
  DsmMetrics m;
  for (float v : truth.pixels()) m.truth_cells += std::isfinite(v) ? 1 : 0;
  double sq = 0.0, ab = 0.0;
  for (std::size_t r = 0; r < grid.rows; ++r)
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const float z = dsm(r, c);
      if (!std::isfinite(z)) continue;
      const auto center = grid.cell_center(r, c);
      std::size_t tr = 0, tc = 0;
      if (!truth_grid.locate(center.easting, center.northing, tr, tc)) continue;
      const float t = truth(tr, tc);
      if (!std::isfinite(t)) continue;
      const double e = static_cast<double>(z) - t;
      sq += e * e;
      ab += std::abs(e);
      m.max_abs = std::max(m.max_abs, std::abs(e));
      ++m.cells;
    }
  if (m.cells == 0) throw EmptyResult("compare_dsm: no overlapping valid cells");
  m.rmse = std::sqrt(sq / static_cast<double>(m.cells));
  m.mae = ab / static_cast<double>(m.cells);
  m.completeness = m.truth_cells ? static_cast<double>(m.cells) / static_cast<double>(m.truth_cells) : 0.0;
  return m;
}

namespace {

nlohmann::json metrics_json(const DisparityMetrics& m) {
  nlohmann::json bad = nlohmann::json::array();
  for (const auto& b : m.bad) bad.push_back({{"threshold", b.threshold}, {"percent", b.percent}});
  return {{"name", m.name},       {"regression_losses", m.regression_losses},
          {"weighted", m.weighted}, {"epe", m.epe},
          {"bad", bad},           {"pixels", m.pixels},
          {"gt_pixels", m.gt_pixels}};
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["bad_convention"] = "bad-N counts pixels with |error| > N px; an error of exactly N is correct (N >= |error|)";
  j["weights"] = r.weights;
  j["overall"] = metrics_json(r.overall);
  j["pairs"] = nlohmann::json::array();
  for (const auto& p : r.pairs) j["pairs"].push_back(metrics_json(p));
  if (r.has_dsm) {
    j["dsm"] = {{"rmse", r.dsm.rmse},   {"mae", r.dsm.mae},
                {"max_abs", r.dsm.max_abs}, {"cells", r.dsm.cells},
                {"truth_cells", r.dsm.truth_cells}, {"completeness", r.dsm.completeness}};
  }
  return j;
}

std::string to_text(const EvalReport& r) {
  std::ostringstream out;
  out << "# smooth-L1 (delta 1 px) per regression; weighted = ";
  for (std::size_t k = 0; k < r.weights.size(); ++k)
    out << (k ? " + " : "") << r.weights[k] << " * L" << (k + 1);
  out << "\n# bad-N: |error| > N px counts as bad, so N >= |error| is correct\n";
  std::vector<std::string> head{"Pair"};
  for (std::size_t k = 0; k < r.weights.size(); ++k) head.push_back("Regression Loss " + std::to_string(k + 1));
  head.push_back("Weighted Loss");
  head.push_back("EPE");
  for (const auto& b : r.overall.bad) head.push_back("bad-" + fmt("%g", b.threshold) + " %");
  head.push_back("Pixels");
  std::vector<std::vector<std::string>> rows{head};
  auto add = [&](const DisparityMetrics& m) {
    std::vector<std::string> row{m.name};
    for (double l : m.regression_losses) row.push_back(fmt("%.3f", l));
    row.push_back(fmt("%.3f", m.weighted));
    row.push_back(fmt("%.3f", m.epe));
    for (const auto& b : m.bad) row.push_back(fmt("%.2f", b.percent));
    row.push_back(std::to_string(m.pixels));
    rows.push_back(std::move(row));
  };
  for (const auto& p : r.pairs) add(p);
  add(r.overall);
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : rows)
    for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out << "  ";
      const auto pad = std::string(width[k] - row[k].size(), ' ');
      out << (k == 0 ? row[k] + pad : pad + row[k]);
    }
    out << '\n';
  }
  if (r.has_dsm) {
    out << "\nDSM  RMSE " << fmt("%.3f", r.dsm.rmse) << " m  MAE " << fmt("%.3f", r.dsm.mae) << " m  max "
        << fmt("%.3f", r.dsm.max_abs) << " m  cells " << r.dsm.cells << "/" << r.dsm.truth_cells
        << "  completeness " << fmt("%.3f", r.dsm.completeness) << '\n';
  }
  return out.str();
}

}  // namespace satstereo::pipeline
