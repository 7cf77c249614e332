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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "satstereo/common/error.hpp"
#include "satstereo/net/train.hpp"

namespace satstereo::net {
namespace {

NetworkConfig tiny_config() {
  NetworkConfig c;
  c.base_channels = 4;
  c.max_disparity = 32;
  c.block_repeats = {1, 1, 1, 1};
  c.spp_pool_sizes = {8, 4, 2, 1};
  return c;
}

Var<float> constant_image(std::size_t rows, std::size_t cols, float v) {
  return leaf(Tensor<float>(Shape{1, 1, rows, cols}, v));
}

Var<float> random_image(std::size_t rows, std::size_t cols, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  Tensor<float> t(Shape{1, 1, rows, cols});
  for (auto& v : t.data) v = n(rng);
  return leaf(std::move(t));
}

void set_all(ParameterStore& p, float v) {
  for (auto& [name, var] : p.entries()) std::fill(var->value.data.begin(), var->value.data.end(), v);
}

// Makes a 3x3 pooling-branch conv copy input channel o to output channel o.
void make_identity_branch(ParameterStore& p, std::size_t branch) {
  auto& w = p.get("fex.pool" + std::to_string(branch) + ".w")->value;
  std::fill(w.data.begin(), w.data.end(), 0.0f);
  const std::size_t out = w.dim(0), in = w.dim(1);
  for (std::size_t o = 0; o < out; ++o) w.data[((o * in + o) * 3 + 1) * 3 + 1] = 1.0f;
}

// ---------------------------------------------------------------- shapes

TEST(Shapes, FullConfigMatchesLayerTable) {
  NetworkConfig cfg;  // base 32, D 352, repeats 6/32/6/6, SPP 64/32/16/8
  const auto t = propagate_shapes(cfg, 256, 512);
  std::map<std::string, Shape> s(t.begin(), t.end());
  EXPECT_EQ(s.at("input"), (Shape{1, 1, 256, 512}));
  for (const char* n : {"fex_initial_a", "fex_initial_b", "fex_initial_c", "fex_blockstack0"})
    EXPECT_EQ(s.at(n), (Shape{1, 32, 128, 256})) << n;
  EXPECT_EQ(s.at("fex_blockstack1"), (Shape{1, 64, 64, 128}));
  EXPECT_EQ(s.at("fex_blockstack2"), (Shape{1, 128, 64, 128}));
  EXPECT_EQ(s.at("fex_blockstack3"), (Shape{1, 128, 64, 128}));
  for (int k = 0; k < 4; ++k) EXPECT_EQ(s.at("fex_pool" + std::to_string(k)), (Shape{1, 32, 64, 128}));
  EXPECT_EQ(s.at("fex_concat"), (Shape{1, 64 + 128 + 4 * 32, 64, 128}));
  EXPECT_EQ(s.at("fex_lastconv_a"), (Shape{1, 128, 64, 128}));
  EXPECT_EQ(s.at("fex_lastconv_b"), (Shape{1, 32, 64, 128}));
  EXPECT_EQ(s.at("cost_volume"), (Shape{1, 64, 88, 64, 128}));
  EXPECT_EQ(s.at("prehourglass"), (Shape{1, 32, 88, 64, 128}));
  for (int k = 0; k < 3; ++k) {
    const std::string h = "hourglass" + std::to_string(k);
    EXPECT_EQ(s.at(h + "_conv_a"), (Shape{1, 64, 44, 32, 64}));
    EXPECT_EQ(s.at(h + "_conv_b"), (Shape{1, 64, 44, 32, 64}));
    EXPECT_EQ(s.at(h + "_conv_c"), (Shape{1, 64, 22, 16, 32}));
    EXPECT_EQ(s.at(h + "_conv_d"), (Shape{1, 64, 22, 16, 32}));
    EXPECT_EQ(s.at(h + "_deconv_e"), (Shape{1, 64, 44, 32, 64}));
    EXPECT_EQ(s.at(h + "_deconv_f"), (Shape{1, 32, 88, 64, 128}));
    EXPECT_EQ(s.at(h), (Shape{1, 32, 88, 64, 128}));
    EXPECT_EQ(s.at("upsample" + std::to_string(k)), (Shape{1, 352, 256, 512}));
    EXPECT_EQ(s.at("disparity" + std::to_string(k)), (Shape{1, 256, 512}));
  }
}

struct ShapeCase {
  NetworkConfig cfg;
  std::size_t rows, cols;
};

std::vector<ShapeCase> reduced_configs() {
  std::vector<ShapeCase> v;
  auto a = tiny_config();
  v.push_back({a, 32, 64});
  auto b = tiny_config();
  b.base_channels = 3;
  b.block_repeats = {2, 1, 1, 2};
  b.upsample = Interp::cubic;
  v.push_back({b, 48, 64});
  auto c = tiny_config();
  c.pooling = PoolingMode::crosshair;
  c.crosshair_bands = {1, 2, 4};
  c.hourglass_count = 2;
  v.push_back({c, 32, 64});
  auto d = tiny_config();
  d.cost_volume = CostVolumeMode::difference;
  d.max_disparity = 16;
  d.spp_pool_sizes = {4, 2, 1};
  d.hourglass_count = 1;
  v.push_back({d, 16, 32});
  auto e = tiny_config();
  e.base_channels = 2;
  e.max_disparity = 48;
  e.spp_pool_sizes = {16, 8};
  v.push_back({e, 64, 80});
  return v;
}

TEST(Shapes, ForwardTraceMatchesFormulaOnReducedConfigs) {
  const auto cases = reduced_configs();
  ASSERT_GE(cases.size(), 5u);
  for (const auto& c : cases) {
    StereoNet net(c.cfg, 3);
    ShapeTrace trace;
    NoGradGuard g;
    const auto out = net.forward(random_image(c.rows, c.cols, 1), random_image(c.rows, c.cols, 2), &trace);
    EXPECT_EQ(trace, propagate_shapes(c.cfg, c.rows, c.cols)) << nlohmann::json(c.cfg).dump();
    ASSERT_EQ(out.disparities.size(), c.cfg.hourglass_count);
    for (const auto& d : out.disparities) EXPECT_EQ(d->value.shape, (Shape{1, c.rows, c.cols}));
  }
}

TEST(Shapes, InvalidInputsAreRejected) {
  auto cfg = tiny_config();
  EXPECT_THROW(propagate_shapes(cfg, 30, 64), InvalidArgument);
  cfg.spp_pool_sizes = {16};
  EXPECT_THROW(propagate_shapes(cfg, 32, 64), InvalidArgument);  // 16 > H/4 = 8
  cfg = tiny_config();
  cfg.pooling = PoolingMode::crosshair;
  cfg.crosshair_bands = {3};
  EXPECT_THROW(propagate_shapes(cfg, 32, 64), InvalidArgument);
  cfg = tiny_config();
  cfg.max_disparity = 24;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.max_disparity = 128;
  EXPECT_THROW(propagate_shapes(cfg, 32, 64), InvalidArgument);  // D/4 = 32 > W/4 = 16
}

// ------------------------------------------------------ feature extraction

TEST(Features, ReducedConfigOutputShape) {
  auto cfg = tiny_config();
  cfg.base_channels = 8;
  StereoNet net(cfg, 1);
  EXPECT_EQ(net.extract_features(random_image(32, 64, 4))->value.shape, (Shape{1, 8, 8, 16}));
}

TEST(Features, ZeroInputWithZeroBiasesGivesZero) {
  StereoNet net(tiny_config(), 5);
  const auto f = net.extract_features(constant_image(32, 64, 0.0f))->value;
  for (float v : f.data) EXPECT_EQ(v, 0.0f);
}

TEST(Pooling, ConstantMapThroughIdentityBranchStaysConstant) {
  for (auto mode : {Interp::linear, Interp::cubic}) {
    auto cfg = tiny_config();
    cfg.upsample = mode;
    StereoNet net(cfg, 2);
    for (std::size_t k = 0; k < cfg.pool_branch_count(); ++k) make_identity_branch(net.params(), k);
    auto feat = leaf(Tensor<float>(Shape{1, 16, 8, 16}, 2.5f));
    for (const auto& br : net.pool_branches(feat)) {
      EXPECT_EQ(br->value.shape, (Shape{1, 4, 8, 16}));
      for (float v : br->value.data) EXPECT_NEAR(v, 2.5f, 1e-6);
    }
  }
}

TEST(Pooling, LargestWindowOnQuarterMapGivesTwoCells) {
  auto feat = random_image(64, 128, 9);
  const auto pooled = avg_pool2d(feat, 64, 64)->value;
  ASSERT_EQ(pooled.shape, (Shape{1, 1, 1, 2}));
  for (std::size_t cell = 0; cell < 2; ++cell) {
    double s = 0;
    for (std::size_t y = 0; y < 64; ++y)
      for (std::size_t x = cell * 64; x < cell * 64 + 64; ++x) s += feat->value.data[y * 128 + x];
    EXPECT_NEAR(pooled.data[cell], s / 4096.0, 1e-6);
  }
}

TEST(Pooling, SppWindowsMatchBruteForceMeans) {
  auto feat = random_image(16, 24, 10);
  for (std::size_t p : {1u, 2u, 4u, 8u, 16u}) {
    const auto pooled = avg_pool2d(feat, p, p)->value;
    ASSERT_EQ(pooled.shape, (Shape{1, 1, 16 / p, 24 / p}));
    for (std::size_t py = 0; py < 16 / p; ++py)
      for (std::size_t px = 0; px < 24 / p; ++px) {
        double s = 0;
        for (std::size_t y = py * p; y < (py + 1) * p; ++y)
          for (std::size_t x = px * p; x < (px + 1) * p; ++x) s += feat->value.data[y * 24 + x];
        EXPECT_NEAR(pooled.data[py * (24 / p) + px], s / static_cast<double>(p * p), 1e-6);
      }
  }
}

TEST(Pooling, CrosshairBandsMatchBruteForceBandMeans) {
  auto cfg = tiny_config();
  cfg.pooling = PoolingMode::crosshair;
  cfg.crosshair_bands = {1, 8};
  StereoNet net(cfg, 2);
  for (std::size_t k = 0; k < cfg.pool_branch_count(); ++k) make_identity_branch(net.params(), k);
  // Positive features so the branch ReLU is the identity.
  std::mt19937 rng(12);
  std::uniform_real_distribution<float> u(0.5f, 3.0f);
  Tensor<float> t(Shape{1, 16, 8, 16});
  for (auto& v : t.data) v = u(rng);
  const auto br = net.pool_branches(leaf(t));
  ASSERT_EQ(br.size(), 4u);
  auto at = [&](std::size_t c, std::size_t y, std::size_t x) { return t.data[(c * 8 + y) * 16 + x]; };
  for (std::size_t c = 0; c < 4; ++c) {
    double global = 0;
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 16; ++x) global += at(c, y, x);
    global /= 128.0;
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        const std::size_t i = (c * 8 + y) * 16 + x;
        double row = 0, col = 0, half = 0;
        for (std::size_t xx = 0; xx < 16; ++xx) row += at(c, y, xx);
        for (std::size_t yy = 0; yy < 8; ++yy) col += at(c, yy, x);
        for (std::size_t yy = 0; yy < 8; ++yy)
          for (std::size_t xx = (x / 8) * 8; xx < (x / 8) * 8 + 8; ++xx) half += at(c, yy, xx);
        EXPECT_NEAR(br[0]->value.data[i], row / 16.0, 1e-5);    // 1-row horizontal bands
        EXPECT_NEAR(br[1]->value.data[i], col / 8.0, 1e-5);     // 1-column vertical bands: column means
        EXPECT_NEAR(br[2]->value.data[i], global, 1e-5);        // one band covering the whole map
        if (x <= 3 || x >= 12) EXPECT_NEAR(br[3]->value.data[i], half / 64.0, 1e-5);
      }
  }
}

// ------------------------------------------------------------ cost volume

TEST(CostVolume, ShiftedRightAlignsAtMatchingLevel) {
  auto left = random_image(16, 32, 3);
  Tensor<float> feat_l(Shape{1, 8, 16, 32}), feat_r(Shape{1, 8, 16, 32});
  std::mt19937 rng(4);
  std::normal_distribution<float> n;
  for (auto& v : feat_l.data) v = n(rng);
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x + 3 < 32; ++x) feat_r.data[(c * 16 + y) * 32 + x] = feat_l.data[(c * 16 + y) * 32 + x + 3];
  const auto v = cost_volume(leaf(feat_l), leaf(feat_r), 8)->value;
  ASSERT_EQ(v.shape, (Shape{1, 16, 8, 16, 32}));
  const std::size_t hw = 16 * 32;
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t i = 0; i < hw; ++i) {
      EXPECT_EQ(v.data[(c * 8 + 0) * hw + i], feat_l.data[c * hw + i]);
      EXPECT_EQ(v.data[((8 + c) * 8 + 0) * hw + i], feat_r.data[c * hw + i]);
      if (i % 32 >= 3 && i % 32 + 3 < 32 + 3) EXPECT_EQ(v.data[(c * 8 + 3) * hw + i], v.data[((8 + c) * 8 + 3) * hw + i]);
    }
}

// ---------------------------------------------------------- regularization

TEST(Hourglass, StagesHalveTwiceAndRestore) {
  auto cfg = tiny_config();
  cfg.base_channels = 8;
  StereoNet net(cfg, 6);
  ShapeTrace trace;
  NoGradGuard g;
  const auto costs = net.regularize(leaf(Tensor<float>(Shape{1, 16, 8, 16, 32}, 0.1f)), &trace);
  std::map<std::string, Shape> s(trace.begin(), trace.end());
  EXPECT_EQ(s.at("hourglass0_conv_a"), (Shape{1, 16, 4, 8, 16}));
  EXPECT_EQ(s.at("hourglass0_conv_c"), (Shape{1, 16, 2, 4, 8}));
  EXPECT_EQ(s.at("hourglass0_deconv_e"), (Shape{1, 16, 4, 8, 16}));
  EXPECT_EQ(s.at("hourglass0_deconv_f"), (Shape{1, 8, 8, 16, 32}));
  ASSERT_EQ(costs.size(), 3u);
  for (const auto& c : costs) EXPECT_EQ(c->value.shape, (Shape{1, 8, 16, 32}));
  EXPECT_THROW(net.regularize(leaf(Tensor<float>(Shape{1, 16, 6, 16, 32}))), InvalidArgument);
}

TEST(Hourglass, ZeroWeightsGiveZeroCosts) {
  StereoNet net(tiny_config(), 6);
  set_all(net.params(), 0.0f);
  std::mt19937 rng(1);
  std::normal_distribution<float> n;
  Tensor<float> vol(Shape{1, 8, 8, 8, 16});
  for (auto& v : vol.data) v = n(rng);
  for (const auto& c : net.regularize(leaf(vol))) {
    for (float v : c->value.data) EXPECT_EQ(v, 0.0f);
  }
}

// -------------------------------------------------------------- regression

TEST(Regression, SoftArgminAnalyticExamples) {
  std::vector<float> cold(8, 0.0f);
  cold[5] = -50.0f;
  EXPECT_NEAR(soft_argmin(leaf(Tensor<float>(Shape{1, 8, 1, 1}, cold)))->value.data[0], 5.0f, 1e-6);
  EXPECT_EQ(soft_argmin(leaf(Tensor<float>(Shape{1, 4, 1, 1}, 0.0f)))->value.data[0], 1.5f);
  const std::vector<double> two{std::log(3.0), 0.0};
  EXPECT_NEAR(soft_argmin(leaf(Tensor<double>(Shape{1, 2, 1, 1}, two)))->value.data[0], 0.75, 1e-12);
}

TEST(Regression, OutputLiesInDisparityRange) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<float> u(-80.0f, 80.0f);
  Tensor<float> c(Shape{2, 17, 5, 6});
  for (auto& v : c.data) v = u(rng);
  const auto out = soft_argmin(leaf(c));
  for (float v : out->value.data) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 16.0f);
  }
}

TEST(Loss, SmoothL1AnalyticExamples) {
  const Tensor<float> gt(Shape{1, 1, 1}, 4.0f);
  EXPECT_EQ(smooth_l1(leaf(Tensor<float>(Shape{1, 1, 1}, 4.0f)), gt, {1})->value.data[0], 0.0f);
  EXPECT_FLOAT_EQ(smooth_l1(leaf(Tensor<float>(Shape{1, 1, 1}, 4.5f)), gt, {1})->value.data[0], 0.125f);
  EXPECT_FLOAT_EQ(smooth_l1(leaf(Tensor<float>(Shape{1, 1, 1}, 2.0f)), gt, {1})->value.data[0], 1.5f);
}

TEST(Loss, WeightedTotalReproducesReportedRows) {
  EXPECT_NEAR(weighted_total_loss(10.814, 10.706, 10.662), 23.563, 1e-3);
  EXPECT_NEAR(weighted_total_loss(10.139, 9.940, 9.916), 21.943, 1e-3);
  EXPECT_NEAR(weighted_total_loss(12.120, 11.692, 11.208), 25.452, 1e-3);
  EXPECT_EQ(weighted_total_loss(0, 0, 0), 0.0);
}

// ---------------------------------------------------------------- training

TEST(Adam, MatchesHandSteppedRecurrenceOnQuadratic) {
  // f(p) = 0.5 a (p - c)^2, gradient a (p - c).
  const double a = 3.0, c = 1.25, lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-7;
  auto p = leaf(Tensor<double>(Shape{1}, std::vector<double>{-2.0}), true);
  Adam<double> opt(b1, b2, eps);
  double ref = -2.0, m = 0.0, v = 0.0, b1t = 1.0, b2t = 1.0;
  for (int t = 1; t <= 50; ++t) {
    p->grad = Tensor<double>(Shape{1}, std::vector<double>{a * (p->value.data[0] - c)});
    opt.step({p}, lr);
    const double g = a * (ref - c);
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    b1t *= b1;
    b2t *= b2;
    ref -= lr * std::sqrt(1.0 - b2t) / (1.0 - b1t) * m / (std::sqrt(v) + eps);
    ASSERT_NEAR(p->value.data[0], ref, 1e-12) << "step " << t;
  }
  EXPECT_EQ(opt.iterations(), 50u);
}

TEST(Training, ZeroLearningRateLeavesParametersBitIdentical) {
  StereoNet net(tiny_config(), 7);
  std::vector<std::vector<float>> before;
  for (const auto& [n, v] : net.params().entries()) before.push_back(v->value.data);
  const auto tiles = random_dot_tiles(2, 32, 64, 32, 1);
  Adam<float> opt;
  TrainConfig tc;
  for (std::size_t s = 0; s < 2; ++s) train_step(net, opt, tiles, tc, 0.0, s);
  std::size_t k = 0;
  for (const auto& [n, v] : net.params().entries()) EXPECT_EQ(v->value.data, before[k++]) << n;
}

TEST(Training, LossTraceIsDeterministic) {
  const auto tiles = random_dot_tiles(4, 32, 64, 32, 3);
  TrainConfig tc;
  tc.seed = 5;
  tc.batch_size = 2;
  std::vector<double> runs[2];
  for (auto& r : runs) {
    StereoNet net(tiny_config(), 9);
    for (const auto& rec : train(net, tiles, tc, 6)) r.push_back(rec.total);
  }
  EXPECT_EQ(runs[0], runs[1]);
}

TEST(Training, NonFiniteLossReportsStep) {
  StereoNet net(tiny_config(), 7);
  auto tiles = random_dot_tiles(1, 32, 64, 32, 1);
  Adam<float> opt;
  TrainConfig tc;
  train_step(net, opt, tiles, tc, 1e-3, 0);
  tiles[0].left(3, 3) = std::numeric_limits<float>::quiet_NaN();
  try {
    train_step(net, opt, tiles, tc, 1e-3, 17);
    FAIL() << "expected Diverged";
  } catch (const Diverged& e) {
    EXPECT_EQ(e.step(), 17u);
  }
}

TEST(Training, RejectsBatchesWithoutGroundTruth) {
  StereoNet net(tiny_config(), 7);
  auto tiles = random_dot_tiles(1, 32, 64, 32, 1);
  tiles[0].gt.valid.fill(0);
  Adam<float> opt;
  EXPECT_THROW(train_step(net, opt, tiles, TrainConfig{}, 1e-3, 0), InvalidArgument);
}

TEST(Training, LearnsZeroDisparityOnIdenticalViews) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<dataset::StereoTile> tiles;
  for (int i = 0; i < 4; ++i) {
    dataset::StereoTile t;
    t.left = ImageF(32, 64);
    for (auto& v : t.left.pixels()) v = u(rng);
    t.left = dataset::normalize_image(t.left);
    t.right = t.left;
    t.gt = DisparityMap(ImageF(32, 64, 0.0f), Mask(32, 64, 1));
    tiles.push_back(std::move(t));
  }
  StereoNet net(tiny_config(), 4);
  TrainConfig tc;
  tc.seed = 1;
  train(net, tiles, tc, 40);
  ImageF probe(40, 56);
  for (auto& v : probe.pixels()) v = u(rng);
  const auto res = infer_disparity(net, probe, probe);
  std::vector<float> d(res.disparity.values.pixels().begin(), res.disparity.values.pixels().end());
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  EXPECT_LT(d[d.size() / 2], 1.0f);
}

TEST(Schedules, NamedSchedulesListStages) {
  EXPECT_EQ(named_schedule("traditional"),
            (std::vector<ScheduleStage>{{"sceneflow", 20, 1e-3}, {"kitti", 100, 1e-3}, {"satellite_small", 10, 1e-3}}));
  EXPECT_EQ(named_schedule("full"), (std::vector<ScheduleStage>{{"sceneflow", 20, 1e-3}, {"satellite_all", 20, 1e-3}}));
  EXPECT_EQ(named_schedule("mixed").size(), 1u);
  EXPECT_THROW(named_schedule("other"), InvalidArgument);
}

TEST(Schedules, StagesRunOneEpochPerPass) {
  std::map<std::string, std::vector<dataset::StereoTile>> data{{"a", random_dot_tiles(3, 32, 64, 32, 1)},
                                                               {"b", random_dot_tiles(2, 32, 64, 32, 2)}};
  TrainConfig tc;
  tc.batch_size = 2;
  tc.schedule = {{"a", 1, 1e-3}, {"b", 2, 5e-4}};
  StereoNet net(tiny_config(), 1);
  EXPECT_EQ(train_schedule(net, data, tc).size(), 2u + 2u);
  tc.schedule = {{"missing", 1, 1e-3}};
  EXPECT_THROW(train_schedule(net, data, tc), InvalidArgument);
}

TEST(RandomDots, ForegroundPixelsCorrespondExactly) {
  const auto tiles = random_dot_tiles(3, 32, 64, 32, 8);
  for (const auto& t : tiles) {
    float dmax = 0;
    for (float v : t.gt.values.pixels()) {
      EXPECT_GE(v, 1.0f);
      EXPECT_LT(v, 32.0f);
      dmax = std::max(dmax, v);
    }
    // Nearest-surface pixels are never occluded, so the two normalized views
    // are related by one affine map there.
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 64; ++x) {
        const float d = t.gt.values(y, x);
        if (d == dmax && static_cast<long>(x) - static_cast<long>(d) >= 0)
          pairs.emplace_back(t.left(y, x), t.right(y, x - static_cast<std::size_t>(d)));
      }
    ASSERT_GT(pairs.size(), 3u);
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, n = static_cast<double>(pairs.size());
    for (auto [a, b] : pairs) {
      sx += a, sy += b, sxx += a * a, syy += b * b, sxy += a * b;
    }
    const double r = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    EXPECT_GT(r, 0.99999);
  }
}

// ---------------------------------------------------------------- inference

TEST(Inference, OutputMatchesInputSizeAndCostIsQuarterScale) {
  StereoNet net(tiny_config(), 2);
  ImageF l(30, 50), r(30, 50);
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u;
  for (auto& v : l.pixels()) v = u(rng);
  for (auto& v : r.pixels()) v = u(rng);
  const auto res = infer_disparity(net, l, r);
  EXPECT_EQ(res.disparity.rows(), 30u);
  EXPECT_EQ(res.disparity.cols(), 50u);
  EXPECT_EQ(res.disparity.valid_count(), 30u * 50u);
  EXPECT_EQ(res.padded_rows % 16, 0u);
  EXPECT_EQ(res.padded_cols % 16, 0u);
  EXPECT_EQ(res.cost.shape, (Shape{1, 8, res.padded_rows / 4, res.padded_cols / 4}));
  ASSERT_EQ(res.regressions.size(), 3u);
  EXPECT_EQ(res.regressions.back(), res.disparity);
}

// --------------------------------------------------------------- persistence

TEST(Checkpoint, RoundTripRestoresEveryParameter) {
  const auto path = std::filesystem::temp_directory_path() / "satstereo_ckpt_test.bin";
  StereoNet a(tiny_config(), 1), b(tiny_config(), 2);
  save_checkpoint(path, a.params());
  load_checkpoint(path, b.params());
  for (std::size_t i = 0; i < a.params().entries().size(); ++i)
    EXPECT_EQ(a.params().entries()[i].second->value, b.params().entries()[i].second->value);
  std::ifstream is(path, std::ios::binary);
  char magic[5];
  is.read(magic, 5);
  EXPECT_EQ(std::string(magic, 5), "OSTN1");
  std::filesystem::remove(path);
}

TEST(Checkpoint, MismatchedOrCorruptFilesAreRejected) {
  const auto path = std::filesystem::temp_directory_path() / "satstereo_ckpt_bad.bin";
  StereoNet a(tiny_config(), 1);
  auto other = tiny_config();
  other.base_channels = 5;
  StereoNet b(other, 1);
  save_checkpoint(path, a.params());
  EXPECT_THROW(load_checkpoint(path, b.params()), FormatError);
  std::filesystem::resize_file(path, 100);
  EXPECT_THROW(load_checkpoint(path, a.params()), FormatError);
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOTCK";
  }
  EXPECT_THROW(load_checkpoint(path, a.params()), FormatError);
  std::filesystem::remove(path);
}

TEST(Config, JsonRoundTrip) {
  auto c = tiny_config();
  c.pooling = PoolingMode::crosshair;
  c.upsample = Interp::cubic;
  c.cost_volume = CostVolumeMode::difference;
  EXPECT_EQ(nlohmann::json(c).get<NetworkConfig>(), c);
  TrainConfig t;
  t.schedule = named_schedule("full");
  const auto back = nlohmann::json(t).get<TrainConfig>();
  EXPECT_EQ(back.schedule, t.schedule);
  EXPECT_EQ(back.adam_eps, 1e-7);
  EXPECT_EQ(nlohmann::json::parse(R"({"schedule":"mixed"})").get<TrainConfig>().schedule, named_schedule("mixed"));
  EXPECT_THROW(nlohmann::json::parse(R"({"pooling_mode":"ring"})").get<NetworkConfig>(), InvalidArgument);
}

}  // namespace
}  // namespace satstereo::net
