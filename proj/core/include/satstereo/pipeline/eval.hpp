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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "satstereo/common/disparity.hpp"
#include "satstereo/dsm/dsm.hpp"

namespace satstereo::pipeline {

/// Predictions for one image pair: one map per regression head, in order.
struct PairPrediction {
  std::string name;
  std::vector<DisparityMap> regressions;
};

struct BadRate {
  double threshold = 0.0;
  double percent = 0.0;  ///< share of pixels with |error| > threshold, in %
};

struct DisparityMetrics {
  std::string name;
  std::vector<double> regression_losses;  ///< smooth-L1 (delta 1) mean per head
  double weighted = 0.0;
  double epe = 0.0;  ///< mean |error| of the last head
  std::vector<BadRate> bad;
  std::size_t pixels = 0;     ///< pixels scored
  std::size_t gt_pixels = 0;  ///< valid ground-truth pixels
};

struct DsmMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double max_abs = 0.0;
  std::size_t cells = 0;        ///< cells valid in both rasters
  std::size_t truth_cells = 0;  ///< valid truth cells
  double completeness = 0.0;    ///< cells / truth_cells
};

struct EvalReport {
  std::vector<double> weights;
  DisparityMetrics overall;               ///< all pairs pooled pixel-wise
  std::vector<DisparityMetrics> pairs;
  bool has_dsm = false;
  DsmMetrics dsm;
};

/// Scores pixels where the ground truth and every head are valid and finite.
/// The weighted value is sum_k weights[k] * loss_k. Throws EmptyResult for
/// empty input or when no pixel can be scored, InvalidArgument for mismatched
/// lists, shapes or head counts.
EvalReport eval_report(std::span<const PairPrediction> preds, std::span<const DisparityMap> gts,
                       const std::vector<double>& weights = {0.5, 0.7, 1.0},
                       const std::vector<double>& bad_thresholds = {1.0, 3.0});

/// Compares cells by location: each valid cell of `dsm` is looked up in
/// `truth` at its center. Throws EmptyResult when nothing overlaps.
DsmMetrics compare_dsm(const dsm::DsmGrid& grid, const ImageF& dsm, const dsm::DsmGrid& truth_grid,
                       const ImageF& truth);

nlohmann::json to_json(const EvalReport& r);
/// Aligned text table: one row per pair plus the pooled row.
std::string to_text(const EvalReport& r);

}  // namespace satstereo::pipeline
