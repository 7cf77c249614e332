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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "satstereo/common/error.hpp"
#include "satstereo/pipeline/config.hpp"
#include "satstereo/rectify/rectifier.hpp"

namespace satstereo::pipeline {

enum class Stage { rectify, gen_gt, tile, train, infer, sgm, dsm, fuse, eval };

/// Command-line name: "rectify", "gen-gt", "tile", ...
std::string stage_name(Stage s);
std::optional<Stage> parse_stage(const std::string& name);

/// Stages of a full run for the configured matcher, in order.
std::vector<Stage> pipeline_stages(Matcher m);

/// A stage failed; partial outputs stay on disk (exit code 3).
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& cause)
      : Error("stage " + stage + " failed: " + cause), stage_(stage), cause_(cause) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& cause() const noexcept { return cause_; }

 private:
  std::string stage_;
  std::string cause_;
};

struct FileHash {
  std::string path;  ///< relative to the output directory when inside it
  std::string sha256;
  friend bool operator==(const FileHash&, const FileHash&) = default;
};

struct StageRecord {
  std::string stage;
  std::string key;  ///< hash of stage settings, seed and input hashes
  std::uint64_t seed = 0;
  std::vector<FileHash> inputs;
  std::vector<FileHash> outputs;
  double wall_time_s = 0.0;
  bool resumed = false;  ///< outputs reused from an earlier run
};

struct Manifest {
  std::uint64_t root_seed = 0;
  std::string config_hash;
  std::string matcher;
  std::vector<StageRecord> stages;

  const StageRecord* find(const std::string& stage) const;
};

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);
/// Empty manifest when the file does not exist.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

struct RunOptions {
  bool force = false;  ///< rerun even when the stage key and outputs match
  std::function<void(const std::string&)> log;
};

/// Runs one stage against the artifacts already in cfg.output_dir and
/// updates manifest.json. A stage is skipped when the manifest holds the same
/// key and every recorded output still hashes the same. Any failure is
/// rethrown as StageError.
StageRecord run_stage(const PipelineConfig& cfg, Stage stage, const RunOptions& opts = {});

/// All stages of pipeline_stages(cfg.matcher) in order.
Manifest run_pipeline(const PipelineConfig& cfg, const RunOptions& opts = {});

/// "pair_<left>_<right>".
std::string pair_id(const std::pair<std::size_t, std::size_t>& p);

/// Per-pair rectification metadata (cameras, homographies, frame size).
void write_geometry(const std::filesystem::path& path, const rectify::PairGeometry& g, const nlohmann::json& extra);
rectify::PairGeometry read_geometry(const std::filesystem::path& path);

}  // namespace satstereo::pipeline
