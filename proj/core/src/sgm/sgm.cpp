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

#include "satstereo/sgm/sgm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "satstereo/common/error.hpp"

namespace satstereo::sgm {

namespace {

struct Direction {
  int dy, dx;
};

constexpr Direction kDirections[8] = {{0, 1}, {0, -1}, {1, 0}, {-1, 0}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};

void aggregate_path(const CostVolume& c, const SgmParams& p, Direction r, std::vector<float>& prev_buf,
                    CostVolume& sum) {
  const long h = static_cast<long>(c.rows()), w = static_cast<long>(c.cols());
  const std::size_t nd = c.disparities();
  // L_r for the whole image; each pixel only reads its predecessor.
  std::vector<float>& lr = prev_buf;
  lr.assign(c.rows() * c.cols() * nd, 0.0f);
  auto idx = [&](long y, long x) { return static_cast<std::size_t>(y * w + x) * nd; };

  const long y0 = r.dy >= 0 ? 0 : h - 1, y1 = r.dy >= 0 ? h : -1, ys = r.dy >= 0 ? 1 : -1;
  const long x0 = r.dx >= 0 ? 0 : w - 1, x1 = r.dx >= 0 ? w : -1, xs = r.dx >= 0 ? 1 : -1;
  for (long y = y0; y != y1; y += ys) {
    for (long x = x0; x != x1; x += xs) {
      const float* cp = c.pixel(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
      float* cur = &lr[idx(y, x)];
      const long py = y - r.dy, px = x - r.dx;
      if (py < 0 || py >= h || px < 0 || px >= w) {
        std::copy(cp, cp + nd, cur);
      } else {
        const float* prev = &lr[idx(py, px)];
        const float prev_min = *std::min_element(prev, prev + nd);
        for (std::size_t d = 0; d < nd; ++d) {
          float best = std::min(prev[d], prev_min + p.p2);
          if (d > 0) best = std::min(best, prev[d - 1] + p.p1);
          if (d + 1 < nd) best = std::min(best, prev[d + 1] + p.p1);
          cur[d] = cp[d] + (best - prev_min);
        }
      }
      float* out = sum.pixel(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
      for (std::size_t d = 0; d < nd; ++d) out[d] += cur[d];
    }
  }
}

// First minimum, refined by a parabola through its neighbours.
float refine(const float* cost, std::size_t nd, bool subpixel) {
  std::size_t best = 0;
  for (std::size_t d = 1; d < nd; ++d) {
    if (cost[d] < cost[best]) best = d;
  }
  double v = static_cast<double>(best);
  if (subpixel && best > 0 && best + 1 < nd) {
    const double a = cost[best - 1], b = cost[best], c = cost[best + 1];
    const double denom = a + c - 2.0 * b;
    if (denom > 0.0) {
      const double off = (a - c) / (2.0 * denom);
      if (std::abs(off) < 0.5) v += off;
    }
  }
  return static_cast<float>(v);
}

}  // namespace

void SgmParams::validate() const {
  if (!(p1 >= 0.0f) || !(p2 >= p1)) throw InvalidArgument("SgmParams: need p2 >= p1 >= 0");
  if (paths != 4 && paths != 8) throw InvalidArgument("SgmParams: paths must be 4 or 8");
  if (census_window < 1 || census_window % 2 == 0 || census_window > 7) {
    throw InvalidArgument("SgmParams: census window must be odd and at most 7");
  }
  if (max_disparity < 1) throw InvalidArgument("SgmParams: max_disparity must be >= 1");
  if (!(uniqueness >= 0.0f && uniqueness < 1.0f)) throw InvalidArgument("SgmParams: uniqueness must be in [0, 1)");
  if (speckle_size < 0 || !(speckle_range >= 0.0f)) {
    throw InvalidArgument("SgmParams: speckle size and range must be >= 0");
  }
}

Raster<std::uint64_t> census_transform(const ImageF& img, int window) {
  if (window < 1 || window % 2 == 0) throw InvalidArgument("census_transform: window must be odd");
  if (window * window - 1 > 64) throw InvalidArgument("census_transform: window too large for 64 bits");
  const long h = static_cast<long>(img.rows()), w = static_cast<long>(img.cols()), r = window / 2;
  Raster<std::uint64_t> out(img.rows(), img.cols(), 0);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const float center = img(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
      std::uint64_t bits = 0;
      int k = 0;
      for (long dy = -r; dy <= r; ++dy) {
        const auto yy = static_cast<std::size_t>(std::clamp(y + dy, 0L, h - 1));
        for (long dx = -r; dx <= r; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const auto xx = static_cast<std::size_t>(std::clamp(x + dx, 0L, w - 1));
          if (img(yy, xx) < center) bits |= std::uint64_t{1} << k;
          ++k;
        }
      }
      out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = bits;
    }
  }
  return out;
}

CostVolume census_cost(const Raster<std::uint64_t>& left, const Raster<std::uint64_t>& right, int max_disparity,
                       int window) {
  if (left.rows() != right.rows() || left.cols() != right.cols()) {
    throw InvalidArgument("census_cost: image shapes differ");
  }
  if (max_disparity < 1) throw InvalidArgument("census_cost: max_disparity must be >= 1");
  const auto nd = static_cast<std::size_t>(max_disparity);
  const auto nbits = static_cast<float>(window * window - 1);
  CostVolume cv(nd, left.rows(), left.cols(), nbits);
  for (std::size_t y = 0; y < left.rows(); ++y) {
    for (std::size_t x = 0; x < left.cols(); ++x) {
      float* c = cv.pixel(y, x);
      const std::size_t dmax = std::min(nd, x + 1);
      for (std::size_t d = 0; d < dmax; ++d) c[d] = static_cast<float>(std::popcount(left(y, x) ^ right(y, x - d)));
    }
  }
  return cv;
}

CostVolume sgm_aggregate(const CostVolume& costs, const SgmParams& params) {
  if (!(params.p1 >= 0.0f) || !(params.p2 >= params.p1)) throw InvalidArgument("sgm_aggregate: need p2 >= p1 >= 0");
  if (params.paths != 4 && params.paths != 8) throw InvalidArgument("sgm_aggregate: paths must be 4 or 8");
  CostVolume sum(costs.disparities(), costs.rows(), costs.cols(), 0.0f);
  std::vector<float> buf;
  for (int k = 0; k < params.paths; ++k) aggregate_path(costs, params, kDirections[k], buf, sum);
  return sum;
}

DisparityMap wta_disparity(const CostVolume& s, bool subpixel) {
  if (s.disparities() < 1) throw InvalidArgument("wta_disparity: empty disparity range");
  DisparityMap out(s.rows(), s.cols());
  for (std::size_t y = 0; y < s.rows(); ++y) {
    for (std::size_t x = 0; x < s.cols(); ++x) {
      out.values(y, x) = refine(s.pixel(y, x), s.disparities(), subpixel);
      out.valid(y, x) = 1;
    }
  }
  return out;
}

DisparityMap wta_disparity_right(const CostVolume& s, bool subpixel) {
  if (s.disparities() < 1) throw InvalidArgument("wta_disparity_right: empty disparity range");
  const std::size_t nd = s.disparities(), w = s.cols();
  DisparityMap out(s.rows(), w);
  std::vector<float> col(nd);
  for (std::size_t y = 0; y < s.rows(); ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t d = 0; d < nd; ++d) {
        col[d] = x + d < w ? s.at(d, y, x + d) : std::numeric_limits<float>::infinity();
      }
      out.values(y, x) = refine(col.data(), nd, subpixel);
      out.valid(y, x) = 1;
    }
  }
  return out;
}

DisparityMap left_right_check(const DisparityMap& left, const DisparityMap& right, float tolerance) {
  if (left.rows() != right.rows() || left.cols() != right.cols()) {
    throw InvalidArgument("left_right_check: shapes differ");
  }
  DisparityMap out = left;
  const long w = static_cast<long>(left.cols());
  for (std::size_t y = 0; y < left.rows(); ++y) {
    for (std::size_t x = 0; x < left.cols(); ++x) {
      if (!left.valid(y, x)) continue;
      const long xr = std::lround(static_cast<double>(x) - left.values(y, x));
      const bool ok = xr >= 0 && xr < w && right.valid(y, static_cast<std::size_t>(xr)) &&
                      std::abs(left.values(y, x) - right.values(y, static_cast<std::size_t>(xr))) <= tolerance;
      if (!ok) {
        out.valid(y, x) = 0;
        out.values(y, x) = 0.0f;
      }
    }
  }
  return out;
}

void uniqueness_check(DisparityMap& disp, const CostVolume& s, float ratio) {
  if (disp.rows() != s.rows() || disp.cols() != s.cols()) throw InvalidArgument("uniqueness_check: shapes differ");
  const std::size_t nd = s.disparities();
  for (std::size_t y = 0; y < s.rows(); ++y) {
    for (std::size_t x = 0; x < s.cols(); ++x) {
      if (!disp.valid(y, x)) continue;
      const float* c = s.pixel(y, x);
      const auto best = static_cast<std::size_t>(std::min_element(c, c + nd) - c);
      float other = std::numeric_limits<float>::infinity();
      for (std::size_t d = 0; d < nd; ++d) {
        if (d + 1 < best || d > best + 1) other = std::min(other, c[d]);
      }
      if (c[best] > (1.0f - ratio) * other) {
        disp.valid(y, x) = 0;
        disp.values(y, x) = 0.0f;
      }
    }
  }
}

void remove_speckles(DisparityMap& disp, int max_size, float max_diff) {
  if (max_size <= 0) return;
  const std::size_t h = disp.rows(), w = disp.cols();
  std::vector<std::uint8_t> seen(h * w, 0);
  std::vector<std::size_t> region, stack;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (seen[start] || !disp.valid(start / w, start % w)) continue;
    region.clear();
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      region.push_back(i);
      const std::size_t y = i / w, x = i % w;
      const float v = disp.values(y, x);
      auto visit = [&](std::size_t yy, std::size_t xx) {
        const std::size_t j = yy * w + xx;
        if (seen[j] || !disp.valid(yy, xx) || std::abs(disp.values(yy, xx) - v) > max_diff) return;
        seen[j] = 1;
        stack.push_back(j);
      };
      if (x > 0) visit(y, x - 1);
      if (x + 1 < w) visit(y, x + 1);
      if (y > 0) visit(y - 1, x);
      if (y + 1 < h) visit(y + 1, x);
    }
    if (region.size() < static_cast<std::size_t>(max_size)) {
      for (std::size_t i : region) {
        disp.valid(i / w, i % w) = 0;
        disp.values(i / w, i % w) = 0.0f;
      }
    }
  }
}

DisparityMap sgm_disparity(const ImageF& left, const ImageF& right, const SgmParams& params) {
  params.validate();
  const auto cl = census_transform(left, params.census_window);
  const auto cr = census_transform(right, params.census_window);
  const auto agg = sgm_aggregate(census_cost(cl, cr, params.max_disparity, params.census_window), params);
  auto dl = wta_disparity(agg, params.subpixel);
  if (params.uniqueness > 0.0f) uniqueness_check(dl, agg, params.uniqueness);
  if (params.lr_check) dl = left_right_check(dl, wta_disparity_right(agg, params.subpixel), params.lr_tolerance);
  if (params.speckle_size > 0) remove_speckles(dl, params.speckle_size, params.speckle_range);
  return dl;
}

}  // namespace satstereo::sgm
