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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "satstereo/common/error.hpp"
#include "satstereo/dataset/tiles.hpp"
#include "satstereo/geo/geodetic.hpp"
#include "satstereo/net/network.hpp"
#include "satstereo/net/train.hpp"
#include "satstereo/sgm/sgm.hpp"

namespace satstereo::pipeline {

/// Malformed or inconsistent configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct SceneConfig {
  std::vector<std::filesystem::path> images;  ///< 16-bit PGM
  std::vector<std::filesystem::path> rpcs;    ///< one per image
  std::filesystem::path lidar;                ///< PFM with JSON sidecar
  std::optional<std::filesystem::path> truth_dsm;  ///< ESRI ASCII, optional
  double ground_plane_alt = 0.0;
  geo::GeodeticBox bbox;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  ///< image indices (left, right)
};

struct RectifyConfig {
  std::size_t n_points = 64;
  double probe_height = 100.0;
  double margin = 4.0;
  int affine_grid = 5;  ///< RPC sampling grid per axis for the affine fit
};

struct GtConfig {
  std::string kind = "dense";  ///< "sparse" (bleed-through cleaned) or "dense"
  double bleed_tolerance = 1.0;
  int bleed_radius = 2;
};

struct TilingConfig {
  dataset::TilingParams params;
  double shift_limit = 10.0;
};

enum class Matcher { sgm, net };

struct TrainStageConfig {
  net::TrainConfig train;
  std::size_t steps = 200;
  std::string dataset = "scene";  ///< tag recorded with the model
  /// When set, the train stage loads this checkpoint instead of training.
  std::optional<std::filesystem::path> checkpoint;
};

struct DsmConfig {
  double cell_size = 0.5;
  double fusion_bin = 0.5;
};

struct EvalConfig {
  std::vector<double> bad_thresholds{1.0, 3.0};
};

struct PipelineConfig {
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;  ///< root seed; every stage seed derives from it
  SceneConfig scene;
  RectifyConfig rectify;
  GtConfig gt;
  TilingConfig tiling;
  Matcher matcher = Matcher::sgm;
  net::NetworkConfig network;
  TrainStageConfig train;
  sgm::SgmParams sgm;
  DsmConfig dsm;
  EvalConfig eval;
  std::size_t jobs = 1;

  /// Effective configuration after overrides, with relative paths as written.
  nlohmann::json source;
};

/// Parses a configuration document. Relative paths resolve against
/// `base_dir`. Throws ConfigError on unknown keys, bad values or missing files.
PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// Reads `path`, applies `overrides` (each "dotted.key=value", value parsed as
/// JSON when possible and as a string otherwise) and parses the result.
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Sets `doc[dotted.key] = value`, creating intermediate objects.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// SHA-256 of the canonical dump of `source`.
std::string config_hash(const PipelineConfig& cfg);

/// Stage seed: splitmix64 of the root seed mixed with the stage name.
std::uint64_t derive_seed(std::uint64_t root, const std::string& stage);

std::string to_string(Matcher m);

}  // namespace satstereo::pipeline
