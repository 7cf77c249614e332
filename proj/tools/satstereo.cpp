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

// satstereo: command-line driver for the stereo-to-DSM pipeline.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "satstereo/pipeline/config.hpp"
#include "satstereo/pipeline/pipeline.hpp"
#include "satstereo/pipeline/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
namespace pl = satstereo::pipeline;

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kStageFailure = 3;

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::string output_dir;
  std::string matcher;
  std::string gt_kind;
  long long seed = -1;
  long long steps = -1;
  std::size_t jobs = 0;
  bool force = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Pipeline JSON config")->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", f.sets, "Override a config key, e.g. --set tiling.step=32 (repeatable)");
  cmd->add_option("--output-dir", f.output_dir, "Overrides output_dir (relative to the working directory)");
  cmd->add_option("--matcher", f.matcher, "Overrides matcher")->check(CLI::IsMember({"sgm", "net"}));
  cmd->add_option("--gt-kind", f.gt_kind, "Overrides gt.kind")->check(CLI::IsMember({"sparse", "dense"}));
  cmd->add_option("--seed", f.seed, "Overrides the root seed")->check(CLI::NonNegativeNumber);
  cmd->add_option("--steps", f.steps, "Overrides train.steps")->check(CLI::NonNegativeNumber);
  cmd->add_option("--jobs", f.jobs, "Worker threads inside a stage")->check(CLI::PositiveNumber);
  cmd->add_flag("--force", f.force, "Rerun stages even when their outputs are up to date");
  cmd->add_flag("-q,--quiet", f.quiet, "Only print errors");
}

pl::PipelineConfig load(const CommonFlags& f) {
  std::vector<std::string> sets;
  if (!f.output_dir.empty()) sets.push_back("output_dir=" + nlohmann::json(fs::absolute(f.output_dir).string()).dump());
  if (!f.matcher.empty()) sets.push_back("matcher=" + nlohmann::json(f.matcher).dump());
  if (!f.gt_kind.empty()) sets.push_back("gt.kind=" + nlohmann::json(f.gt_kind).dump());
  if (f.seed >= 0) sets.push_back("seed=" + std::to_string(f.seed));
  if (f.steps >= 0) sets.push_back("train.steps=" + std::to_string(f.steps));
  if (f.jobs > 0) sets.push_back("jobs=" + std::to_string(f.jobs));
  sets.insert(sets.end(), f.sets.begin(), f.sets.end());
  return pl::load_config(f.config, sets);
}

pl::RunOptions options(const CommonFlags& f) {
  pl::RunOptions o;
  o.force = f.force;
  if (!f.quiet) o.log = [](const std::string& m) { std::cerr << m << '\n'; };
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Satellite stereo pipeline: rectification, ground truth, matching and DSM fusion"};
  app.require_subcommand(1);

  std::string synth_dir;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "Write the built-in synthetic two-building scene and its config");
  synth->add_option("--out", synth_dir, "Destination directory")->required();
  synth->add_option("--seed", synth_seed, "Texture and root seed");
  pl::SyntheticSceneSpec spec;
  synth->add_option("--texture-scale", spec.texture_scale, "Metres per texture noise cell")
      ->check(CLI::PositiveNumber);
  synth->add_option("--gsd", spec.gsd, "Ground sampling distance of the views (m/px)")->check(CLI::PositiveNumber);

  CommonFlags flags;
  std::vector<std::pair<CLI::App*, pl::Stage>> stage_cmds;
  const std::pair<const char*, const char*> stage_help[] = {
      {"rectify", "Fit affine cameras and rectify every pair"},
      {"gen-gt", "Project LiDAR into the rectified pairs: sparse, cleaned and dense disparity"},
      {"tile", "Cut, filter and canonicalize training tiles"},
      {"train", "Train the network on the tiles (or load train.checkpoint)"},
      {"infer", "Network disparity for every pair"},
      {"sgm", "Semi-global matching disparity for every pair"},
      {"dsm", "Triangulate and rasterize one DSM per pair"},
      {"fuse", "Fuse the pairwise DSMs"},
      {"eval", "Disparity and DSM metrics"}};
  for (const auto& [name, help] : stage_help) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, flags);
    stage_cmds.emplace_back(cmd, *pl::parse_stage(name));
  }
  auto* run = app.add_subcommand("run", "Every stage in order, skipping the ones that are up to date");
  add_common(run, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (synth->parsed()) {
      spec.seed = synth_seed;
      std::cout << pl::write_synthetic_scene(synth_dir, spec).string() << '\n';
      return kOk;
    }
    const auto cfg = load(flags);
    if (run->parsed()) {
      pl::run_pipeline(cfg, options(flags));
    } else {
      for (const auto& [cmd, stage] : stage_cmds)
        if (cmd->parsed()) pl::run_stage(cfg, stage, options(flags));
    }
    if (!flags.quiet) std::cerr << "manifest: " << (cfg.output_dir / "manifest.json").string() << '\n';
    return kOk;
  } catch (const pl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const pl::StageError& e) {
    std::cerr << e.what() << '\n';
    return kStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStageFailure;
  }
}
