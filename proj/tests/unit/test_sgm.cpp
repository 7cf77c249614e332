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

#include <cmath>
#include <random>
#include <vector>

#include "satstereo/common/error.hpp"
#include "satstereo/sgm/sgm.hpp"

namespace satstereo::sgm {
namespace {

ImageF random_image(std::size_t rows, std::size_t cols, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 255.0f);
  ImageF img(rows, cols);
  for (auto& v : img.pixels()) v = u(rng);
  return img;
}

TEST(Census, ConstantImageIsZero) {
  const auto c = census_transform(ImageF(6, 7, 3.0f), 5);
  for (auto v : c.pixels()) EXPECT_EQ(v, 0u);
}

TEST(Census, HorizontalRampSetsLeftNeighbours) {
  ImageF img(5, 6);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 6; ++c) img(r, c) = static_cast<float>(c);
  const auto cen = census_transform(img, 3);
  // Row-major neighbours skipping the center: left column is bits 0, 3, 5.
  const std::uint64_t left_bits = (1u << 0) | (1u << 3) | (1u << 5);
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 1; c < 5; ++c) EXPECT_EQ(cen(r, c), left_bits);
}

TEST(Census, MatchesBruteForceBitList) {
  const auto img = random_image(9, 11, 3);
  for (int win : {3, 5, 7}) {
    const auto cen = census_transform(img, win);
    const int h = win / 2;
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 11; ++x) {
        std::vector<bool> bits;
        for (int yy = y - h; yy <= y + h; ++yy) {
          for (int xx = x - h; xx <= x + h; ++xx) {
            if (yy == y && xx == x) continue;
            const int cy = yy < 0 ? 0 : (yy > 8 ? 8 : yy), cx = xx < 0 ? 0 : (xx > 10 ? 10 : xx);
            bits.push_back(img(cy, cx) < img(y, x));
          }
        }
        std::uint64_t expect = 0;
        for (std::size_t k = 0; k < bits.size(); ++k) expect += bits[k] ? std::uint64_t{1} << k : 0;
        ASSERT_EQ(cen(y, x), expect) << win << " " << y << " " << x;
      }
    }
  }
}

TEST(Census, Errors) {
  EXPECT_THROW(census_transform(ImageF(3, 3), 4), InvalidArgument);
  EXPECT_THROW(census_transform(ImageF(3, 3), 9), InvalidArgument);
}

TEST(Aggregate, ZeroPenaltiesGivePathMultiple) {
  std::mt19937 rng(8);
  std::uniform_int_distribution<int> u(0, 24);
  CostVolume c(6, 7, 9);
  for (std::size_t y = 0; y < 7; ++y)
    for (std::size_t x = 0; x < 9; ++x)
      for (std::size_t d = 0; d < 6; ++d) c.at(d, y, x) = static_cast<float>(u(rng));
  for (int paths : {4, 8}) {
    SgmParams p;
    p.p1 = p.p2 = 0.0f;
    p.paths = paths;
    const auto a = sgm_aggregate(c, p);
    for (std::size_t y = 0; y < 7; ++y)
      for (std::size_t x = 0; x < 9; ++x)
        for (std::size_t d = 0; d < 6; ++d) ASSERT_EQ(a.at(d, y, x), paths * c.at(d, y, x));
  }
}

TEST(Aggregate, HandSteppedTwoPixelRow) {
  // One row, two pixels, D = 2, P1 = 2, P2 = 3, four paths. Vertical paths
  // start and end at each pixel, so they contribute the raw costs.
  CostVolume c(2, 1, 2);
  c.at(0, 0, 0) = 0;
  c.at(1, 0, 0) = 5;
  c.at(0, 0, 1) = 4;
  c.at(1, 0, 1) = 1;
  SgmParams p;
  p.p1 = 2;
  p.p2 = 3;
  p.paths = 4;
  const auto a = sgm_aggregate(c, p);
  // +x path: x1 -> [4 + min(0,7,3) - 0, 1 + min(5,2,3) - 0] = [4, 3]
  // -x path: x0 -> [0 + min(4,3,4) - 1, 5 + min(1,6,4) - 1] = [2, 5]
  EXPECT_EQ(a.at(0, 0, 0), 2 * 0 + 0 + 2);
  EXPECT_EQ(a.at(1, 0, 0), 2 * 5 + 5 + 5);
  EXPECT_EQ(a.at(0, 0, 1), 2 * 4 + 4 + 4);
  EXPECT_EQ(a.at(1, 0, 1), 2 * 1 + 3 + 1);
}

TEST(Aggregate, SpatiallyConstantCostsKeepArgmin) {
  CostVolume c(7, 5, 6);
  const float f[7] = {9, 4, 6, 1.5f, 8, 3, 7};
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 6; ++x)
      for (std::size_t d = 0; d < 7; ++d) c.at(d, y, x) = f[d];
  const auto disp = wta_disparity(sgm_aggregate(c, SgmParams{}), false);
  for (float v : disp.values.pixels()) EXPECT_EQ(v, 3.0f);
}

TEST(Wta, SymmetricMinimumAndParabola) {
  CostVolume c(12, 1, 2);
  for (std::size_t d = 0; d < 12; ++d) {
    c.at(d, 0, 0) = static_cast<float>((static_cast<int>(d) - 7) * (static_cast<int>(d) - 7));
    c.at(d, 0, 1) = 10.0f;
  }
  c.at(3, 0, 1) = 4.0f;
  c.at(4, 0, 1) = 1.0f;
  c.at(5, 0, 1) = 2.0f;
  const auto d = wta_disparity(c);
  EXPECT_EQ(d.values(0, 0), 7.0f);
  EXPECT_FLOAT_EQ(d.values(0, 1), 4.25f);
}

TEST(Wta, RangeAndOffsetBoundsOnRandomVolumes) {
  std::mt19937 rng(12);
  std::uniform_real_distribution<float> u(0.0f, 50.0f);
  CostVolume c(9, 10, 10);
  for (std::size_t y = 0; y < 10; ++y)
    for (std::size_t x = 0; x < 10; ++x)
      for (std::size_t d = 0; d < 9; ++d) c.at(d, y, x) = u(rng);
  const auto sub = wta_disparity(c, true), integer = wta_disparity(c, false);
  for (std::size_t i = 0; i < sub.values.size(); ++i) {
    const float v = sub.values.data()[i];
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 8.0f);
    EXPECT_LT(std::abs(v - integer.values.data()[i]), 0.5f);
  }
}

TEST(Sgm, FrontoParallelShiftIsRecovered) {
  const std::size_t rows = 40, cols = 80;
  const int s = 6;
  const auto left = random_image(rows, cols, 21);
  auto right = random_image(rows, cols, 22);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c + s < cols; ++c) right(r, c) = left(r, c + s);
  SgmParams p;
  p.max_disparity = 16;
  p.subpixel = false;
  p.lr_check = false;
  const auto d = sgm_disparity(left, right, p);
  std::size_t exact = 0, total = 0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = s; c < cols; ++c) {
      ++total;
      exact += d.values(r, c) == static_cast<float>(s);
    }
  EXPECT_GE(static_cast<double>(exact), 0.99 * static_cast<double>(total));
}

TEST(Sgm, LeftRightCheckFlagsHalfOcclusion) {
  // Background at disparity 2, a foreground strip at disparity 8 over left
  // columns [30, 50). Left columns [24, 30) are hidden in the right view.
  const std::size_t rows = 40, cols = 100;
  const auto bg = random_image(rows, cols + 20, 31), fg = random_image(rows, cols + 20, 32);
  ImageF left(rows, cols), right(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t x = 0; x < cols; ++x) {
      left(r, x) = (x >= 30 && x < 50) ? fg(r, x - 8 + 10) : bg(r, x - 2 + 10);
      right(r, x) = (x >= 22 && x < 42) ? fg(r, x + 10) : bg(r, x + 10);
    }
  }
  SgmParams p;
  p.max_disparity = 16;
  const auto d = sgm_disparity(left, right, p);
  std::size_t band_invalid = 0, outside_invalid = 0, outside_total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t x = 16; x < cols; ++x) {
      const bool band = x >= 24 && x < 30;
      const bool near_band = x >= 22 && x < 32;
      if (band) band_invalid += !d.valid(r, x);
      if (!near_band) {
        ++outside_total;
        outside_invalid += !d.valid(r, x);
      }
    }
  }
  EXPECT_GE(static_cast<double>(band_invalid), 0.8 * rows * 6);
  EXPECT_LE(static_cast<double>(outside_invalid), 0.01 * static_cast<double>(outside_total));
}

TEST(Sgm, LeftRightCheckOracle) {
  DisparityMap l(1, 6), r(1, 6);
  l.valid.fill(1);
  r.valid.fill(1);
  for (std::size_t x = 0; x < 6; ++x) {
    l.values(0, x) = 2.0f;
    r.values(0, x) = 2.0f;
  }
  r.values(0, 2) = 4.5f;  // inconsistent with left pixel 4
  const auto out = left_right_check(l, r, 1.0f);
  EXPECT_FALSE(out.valid(0, 0));  // maps outside the right image
  EXPECT_FALSE(out.valid(0, 1));
  EXPECT_TRUE(out.valid(0, 3));
  EXPECT_FALSE(out.valid(0, 4));
  EXPECT_TRUE(out.valid(0, 5));
}

TEST(SgmParams, Validation) {
  SgmParams p;
  EXPECT_NO_THROW(p.validate());
  p.p2 = 5.0f;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = {};
  p.paths = 6;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = {};
  p.census_window = 9;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = {};
  p.uniqueness = 1.0f;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = {};
  p.speckle_size = -1;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(Uniqueness, RunnerUpSkipsAdjacentDisparities) {
  // Pixel 0: best 10 at d=2, d=3 is adjacent (ignored), runner-up 20 at d=5.
  // Pixel 1: best 10 at d=1, runner-up 11 at d=4.
  CostVolume cv(6, 1, 2, 50.0f);
  cv.at(2, 0, 0) = 10.0f;
  cv.at(3, 0, 0) = 10.5f;
  cv.at(5, 0, 0) = 20.0f;
  cv.at(1, 0, 1) = 10.0f;
  cv.at(4, 0, 1) = 11.0f;
  auto d = wta_disparity(cv, false);
  uniqueness_check(d, cv, 0.2f);
  EXPECT_TRUE(d.valid(0, 0));
  EXPECT_EQ(d.values(0, 0), 2.0f);
  EXPECT_FALSE(d.valid(0, 1));
  // 10 <= (1 - 0.05) * 11 keeps pixel 1 at a looser ratio.
  auto d2 = wta_disparity(cv, false);
  uniqueness_check(d2, cv, 0.05f);
  EXPECT_TRUE(d2.valid(0, 1));
}

TEST(Speckles, SmallRegionsRemoved) {
  DisparityMap d(4, 6);
  d.valid.fill(1);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 6; ++x) d.values(y, x) = 5.0f + 0.5f * static_cast<float>(x % 2);
  // Two-pixel blob at a far disparity; a lone pixel bordered by invalid ones.
  d.values(1, 1) = 20.0f;
  d.values(1, 2) = 20.5f;
  d.values(3, 5) = 5.0f;
  d.valid(2, 5) = 0;
  d.valid(3, 4) = 0;
  remove_speckles(d, 3, 1.0f);
  EXPECT_FALSE(d.valid(1, 1));
  EXPECT_FALSE(d.valid(1, 2));
  EXPECT_FALSE(d.valid(3, 5));
  std::size_t valid = 0;
  for (auto v : d.valid.pixels()) valid += v;
  EXPECT_EQ(valid, 24u - 5u);
  remove_speckles(d, 0, 1.0f);  // disabled
  valid = 0;
  for (auto v : d.valid.pixels()) valid += v;
  EXPECT_EQ(valid, 19u);
}

TEST(Sgm, PostFiltersKeepCleanShift) {
  const std::size_t rows = 40, cols = 80;
  const int s = 6;
  const auto left = random_image(rows, cols, 23);
  auto right = random_image(rows, cols, 24);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c + s < cols; ++c) right(r, c) = left(r, c + s);
  SgmParams p;
  p.max_disparity = 16;
  p.subpixel = false;
  p.uniqueness = 0.25f;
  p.speckle_size = 100;
  const auto d = sgm_disparity(left, right, p);
  std::size_t exact = 0, total = 0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = s + 1; c + 1 < cols; ++c) {
      ++total;
      exact += d.valid(r, c) && d.values(r, c) == static_cast<float>(s);
    }
  EXPECT_GE(static_cast<double>(exact), 0.99 * static_cast<double>(total));
}

}  // namespace
}  // namespace satstereo::sgm
