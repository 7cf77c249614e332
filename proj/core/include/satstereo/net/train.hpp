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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "satstereo/common/disparity.hpp"
#include "satstereo/dataset/tiles.hpp"
#include "satstereo/net/network.hpp"

namespace satstereo::net {

struct ScheduleStage {
  std::string dataset;
  std::size_t epochs = 0;
  double learning_rate = 1e-3;

  friend bool operator==(const ScheduleStage&, const ScheduleStage&) = default;
};

/// "traditional", "full" or "mixed"; throws InvalidArgument otherwise.
std::vector<ScheduleStage> named_schedule(const std::string& name);

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-7;
  std::vector<double> loss_weights{0.5, 0.7, 1.0};
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::vector<ScheduleStage> schedule;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// 0.5 l0 + 0.7 l1 + l2.
double weighted_total_loss(double l0, double l1, double l2);

/// Adam with bias correction folded into the step size:
/// alpha_t = lr sqrt(1 - b2^t) / (1 - b1^t), p -= alpha_t m / (sqrt(v) + eps).
template <class T>
class Adam {
 public:
  explicit Adam(T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-7)) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Parameters without an allocated gradient are treated as zero-gradient.
  void step(const std::vector<Var<T>>& params, T lr);
  std::size_t iterations() const noexcept { return t_; }

 private:
  T beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

struct LossRecord {
  std::size_t step = 0;
  std::vector<double> losses;  ///< per hourglass, averaged over the batch
  double total = 0.0;
};

/// Forward, weighted loss, gradients accumulated item by item in batch
/// order, one optimizer update. Ground truth outside [0, D) is ignored.
/// Throws Diverged(step) on a non-finite loss.
LossRecord train_step(StereoNet& net, Adam<float>& opt, std::span<const dataset::StereoTile> batch,
                      const TrainConfig& cfg, double learning_rate, std::size_t step);

/// Mean losses over `tiles` without updating anything.
LossRecord evaluate_loss(const StereoNet& net, std::span<const dataset::StereoTile> tiles, const TrainConfig& cfg);

using StepCallback = std::function<void(const LossRecord&)>;

/// Runs `steps` updates cycling through a seeded permutation of `tiles`.
std::vector<LossRecord> train(StereoNet& net, std::span<const dataset::StereoTile> tiles, const TrainConfig& cfg,
                              std::size_t steps, const StepCallback& cb = {});

/// Runs every schedule stage against the matching dataset tag.
std::vector<LossRecord> train_schedule(StereoNet& net,
                                       const std::map<std::string, std::vector<dataset::StereoTile>>& datasets,
                                       const TrainConfig& cfg, const StepCallback& cb = {});

/// Synthetic random-dot stereograms: a fronto-parallel background and one
/// nearer rectangle, integer disparities in [1, max_disparity), right view
/// forward-warped with occlusion ordering. Dots are dot_size x dot_size
/// blocks of one random value. Images are normalized.
std::vector<dataset::StereoTile> random_dot_tiles(std::size_t count, std::size_t rows, std::size_t cols,
                                                  std::size_t max_disparity, std::uint64_t seed,
                                                  std::size_t dot_size = 1);

struct InferResult {
  DenseDisparity disparity;  ///< input size, every pixel valid
  /// Every regression head in order; the last equals `disparity`.
  std::vector<DenseDisparity> regressions;
  Tensor<float> cost;        ///< final regularized cost map (1, D/4, H'/4, W'/4) of the padded input
  std::size_t padded_rows = 0;
  std::size_t padded_cols = 0;
};

/// Normalizes both images, edge-pads to the network's size constraints, runs
/// without recording gradients and crops back.
InferResult infer_disparity(const StereoNet& net, const ImageF& left, const ImageF& right);

/// Image as a (1, 1, H, W) tensor.
Tensor<float> image_tensor(const ImageF& img);

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params);
/// Every record must match a parameter of the same name and shape, and every
/// parameter must be present; throws FormatError otherwise.
void load_checkpoint(const std::filesystem::path& path, ParameterStore& params);

}  // namespace satstereo::net
