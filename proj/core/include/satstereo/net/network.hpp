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

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "satstereo/net/ops.hpp"

namespace satstereo::net {

enum class PoolingMode { spp, crosshair };
enum class CostVolumeMode { concat, difference };

struct NetworkConfig {
  std::size_t base_channels = 32;
  std::size_t max_disparity = 352;
  std::array<std::size_t, 4> block_repeats{6, 32, 6, 6};
  std::vector<std::size_t> spp_pool_sizes{64, 32, 16, 8};
  std::vector<std::size_t> crosshair_bands{4, 8, 16, 32};
  PoolingMode pooling = PoolingMode::spp;
  Interp upsample = Interp::linear;
  std::size_t hourglass_count = 3;
  CostVolumeMode cost_volume = CostVolumeMode::concat;

  /// Checks the configuration alone (channel counts, disparity divisibility).
  void validate() const;
  /// Additionally checks an input size: H, W multiples of 16, pooling
  /// windows inside the quarter-resolution map, D/4 <= W/4.
  void validate_input(std::size_t rows, std::size_t cols) const;

  std::size_t pool_branch_count() const;
  std::size_t cost_channels() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

/// (layer name, output shape) in execution order.
using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

/// Output shapes of every traced layer for a 1 x 1 x rows x cols input,
/// from the layer formulas alone (no weights are created).
ShapeTrace propagate_shapes(const NetworkConfig& cfg, std::size_t rows, std::size_t cols);

/// Named parameters in creation order.
class ParameterStore {
 public:
  Var<float> add(const std::string& name, Tensor<float> init);
  const Var<float>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<std::pair<std::string, Var<float>>>& entries() const { return entries_; }
  std::vector<Var<float>> vars() const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Var<float>>> entries_;
  std::map<std::string, std::size_t> index_;
};

struct NetOutput {
  Var<float> cost_volume;          ///< (N, C, D/4, H/4, W/4)
  std::vector<Var<float>> costs;   ///< per hourglass, (N, D/4, H/4, W/4)
  std::vector<Var<float>> disparities;  ///< per hourglass, (N, H, W)
};

class StereoNet {
 public:
  /// He-normal weights drawn from `seed`, zero biases.
  StereoNet(NetworkConfig cfg, std::uint64_t seed);

  const NetworkConfig& config() const noexcept { return cfg_; }
  ParameterStore& params() noexcept { return params_; }
  const ParameterStore& params() const noexcept { return params_; }

  /// left, right (N, 1, H, W). When `trace` is given, every layer output of
  /// the left branch and the matching stages is appended.
  NetOutput forward(const Var<float>& left, const Var<float>& right, ShapeTrace* trace = nullptr) const;

  /// (N,1,H,W) -> (N, base, H/4, W/4).
  Var<float> extract_features(const Var<float>& img, ShapeTrace* trace = nullptr) const;

  /// Context branches over the quarter-resolution map; each branch output
  /// has base channels and the input's spatial size.
  std::vector<Var<float>> pool_branches(const Var<float>& feat, ShapeTrace* trace = nullptr) const;

  /// Regularization cascade over a cost volume; one cost map per hourglass.
  std::vector<Var<float>> regularize(const Var<float>& volume, ShapeTrace* trace = nullptr) const;

  /// Upsamples a (N, D/4, H/4, W/4) cost map to full resolution and regresses
  /// (N, H, W) disparities. `index` names the traced layers.
  Var<float> regress(const Var<float>& cost, std::size_t rows, std::size_t cols, ShapeTrace* trace = nullptr,
                     std::size_t index = 0) const;

 private:
  NetworkConfig cfg_;
  ParameterStore params_;

  void add_conv2d(const std::string& name, std::size_t in, std::size_t out, std::size_t k, bool bias, std::mt19937_64& rng,
                  float gain = 1.0f);
  void add_conv3d(const std::string& name, std::size_t in, std::size_t out, bool transpose, std::mt19937_64& rng,
                  float gain = 1.0f);
  Var<float> conv2(const std::string& name, const Var<float>& x, int stride, int pad, int dilation) const;
  Var<float> conv3(const std::string& name, const Var<float>& x, int stride) const;
  Var<float> deconv3(const std::string& name, const Var<float>& x) const;
  Var<float> block_stack(std::size_t stack, const Var<float>& x, int stride, int dilation) const;
};

}  // namespace satstereo::net
