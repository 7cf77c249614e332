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

#include "satstereo/gt/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "satstereo/common/error.hpp"

namespace satstereo::gt {
namespace {

__extension__ typedef __int128 i128;
constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
constexpr std::int32_t kMaxCoord = 1 << 19;

// > 0 when d lies strictly inside the circle through a, b, c (a, b, c
// clockwise in a y-up frame, the orientation used for all triangles here).
i128 incircle_cw(const GridPoint& a, const GridPoint& b, const GridPoint& c, const GridPoint& d) {
  const i128 adx = a.x - d.x, ady = a.y - d.y;
  const i128 bdx = b.x - d.x, bdy = b.y - d.y;
  const i128 cdx = c.x - d.x, cdy = c.y - d.y;
  const i128 alift = adx * adx + ady * ady;
  const i128 blift = bdx * bdx + bdy * bdy;
  const i128 clift = cdx * cdx + cdy * cdy;
  const i128 det = adx * (bdy * clift - blift * cdy) - ady * (bdx * clift - blift * cdx) +
                   alift * (bdx * cdy - bdy * cdx);
  return -det;
}

// True when p sees the directed hull edge a -> b (hull is clockwise).
bool sees(const GridPoint& p, const GridPoint& a, const GridPoint& b) { return orient2d(p, a, b) > 0; }

double pseudo_angle(double dx, double dy) {
  const double p = dx / (std::abs(dx) + std::abs(dy));
  return (dy > 0.0 ? 3.0 - p : 1.0 + p) / 4.0;
}

}  // namespace

std::int64_t orient2d(const GridPoint& a, const GridPoint& b, const GridPoint& c) noexcept {
  return (static_cast<std::int64_t>(b.x) - a.x) * (static_cast<std::int64_t>(c.y) - a.y) -
         (static_cast<std::int64_t>(b.y) - a.y) * (static_cast<std::int64_t>(c.x) - a.x);
}

Delaunay::Delaunay(std::span<const GridPoint> pts) {
  const std::size_t n = pts.size();
  if (n < 3) throw Degeneracy("Delaunay: fewer than three points");
  if (n >= kNone / 3) throw InvalidArgument("Delaunay: too many points");
  for (const auto& p : pts) {
    if (std::abs(p.x) >= kMaxCoord || std::abs(p.y) >= kMaxCoord) {
      throw InvalidArgument("Delaunay: coordinate out of range");
    }
  }

  // Seed edge: point nearest the bbox center and its nearest neighbour. The
  // nearest-neighbour pair is a Delaunay edge.
  std::int64_t min_x = kMaxCoord, min_y = kMaxCoord, max_x = -kMaxCoord, max_y = -kMaxCoord;
  for (const auto& p : pts) {
    min_x = std::min<std::int64_t>(min_x, p.x);
    max_x = std::max<std::int64_t>(max_x, p.x);
    min_y = std::min<std::int64_t>(min_y, p.y);
    max_y = std::max<std::int64_t>(max_y, p.y);
  }
  auto dist2 = [](const GridPoint& a, std::int64_t x2, std::int64_t y2) {
    const std::int64_t dx = 2 * static_cast<std::int64_t>(a.x) - x2, dy = 2 * static_cast<std::int64_t>(a.y) - y2;
    return dx * dx + dy * dy;
  };
  std::uint32_t i0 = 0;
  for (std::uint32_t i = 1; i < n; ++i) {
    if (dist2(pts[i], min_x + max_x, min_y + max_y) < dist2(pts[i0], min_x + max_x, min_y + max_y)) i0 = i;
  }
  std::uint32_t i1 = kNone;
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (std::uint32_t i = 0; i < n; ++i) {
    if (i == i0) continue;
    const std::int64_t d = dist2(pts[i], 2 * static_cast<std::int64_t>(pts[i0].x), 2 * static_cast<std::int64_t>(pts[i0].y));
    if (d == 0) throw InvalidArgument("Delaunay: duplicate points");
    if (d < best) {
      best = d;
      i1 = i;
    }
  }

  // Third seed vertex: the Delaunay neighbour of edge i0-i1 on whichever
  // side has points, so the seed circumcircle is empty.
  auto delaunay_neighbour = [&](std::uint32_t a, std::uint32_t b) {
    std::uint32_t cand = kNone;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (i == a || i == b || orient2d(pts[a], pts[b], pts[i]) >= 0) continue;  // keep right-hand side
      if (cand == kNone || incircle_cw(pts[a], pts[b], pts[cand], pts[i]) > 0) cand = i;
    }
    return cand;
  };
  std::uint32_t i2 = delaunay_neighbour(i0, i1);
  if (i2 == kNone) {
    std::swap(i0, i1);
    i2 = delaunay_neighbour(i0, i1);
  }
  if (i2 == kNone) throw Degeneracy("Delaunay: all points are collinear");
  // (i0, i1, i2) is clockwise by construction.

  // Circumcenter as exact rationals (ux / den, uy / den) for an exact sort.
  const i128 ax = pts[i0].x, ay = pts[i0].y;
  const i128 bx = pts[i1].x - ax, by = pts[i1].y - ay;
  const i128 cx = pts[i2].x - ax, cy = pts[i2].y - ay;
  const i128 bl = bx * bx + by * by, cl = cx * cx + cy * cy;
  const i128 den = 2 * (bx * cy - by * cx);
  const i128 ux = (cy * bl - by * cl) + ax * den;
  const i128 uy = (bx * cl - cx * bl) + ay * den;
  std::vector<i128> key(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const i128 dx = static_cast<i128>(pts[i].x) * den - ux;
    const i128 dy = static_cast<i128>(pts[i].y) * den - uy;
    key[i] = dx * dx + dy * dy;
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return key[a] != key[b] ? key[a] < key[b] : a < b;
  });
  const double cxd = static_cast<double>(ux) / static_cast<double>(den);
  const double cyd = static_cast<double>(uy) / static_cast<double>(den);

  const std::size_t hash_size = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  std::vector<std::uint32_t> hull_prev(n), hull_tri(n), hull_hash(hash_size, kNone);
  hull_next_.assign(n, 0);
  auto hash_key = [&](const GridPoint& p) {
    const double a = pseudo_angle(p.x - cxd, p.y - cyd) * static_cast<double>(hash_size);
    return static_cast<std::size_t>(std::floor(a)) % hash_size;
  };

  triangles_.reserve(6 * n);
  halfedges_.reserve(6 * n);
  auto link = [&](std::int64_t a, std::int64_t b) {
    halfedges_[static_cast<std::size_t>(a)] = b;
    if (b != -1) halfedges_[static_cast<std::size_t>(b)] = a;
  };
  auto add_triangle = [&](std::uint32_t v0, std::uint32_t v1, std::uint32_t v2, std::int64_t a, std::int64_t b,
                          std::int64_t c) {
    const auto t = static_cast<std::int64_t>(triangles_.size());
    triangles_.insert(triangles_.end(), {v0, v1, v2});
    halfedges_.insert(halfedges_.end(), {-1, -1, -1});
    link(t, a);
    link(t + 1, b);
    link(t + 2, c);
    return t;
  };

  std::vector<std::int64_t> stack;
  auto legalize = [&](std::int64_t a) {
    std::int64_t ar = 0;
    while (true) {
      const std::int64_t b = halfedges_[static_cast<std::size_t>(a)];
      const std::int64_t a0 = a - a % 3;
      ar = a0 + (a + 2) % 3;
      if (b == -1) {
        if (stack.empty()) break;
        a = stack.back();
        stack.pop_back();
        continue;
      }
      const std::int64_t b0 = b - b % 3;
      const std::int64_t al = a0 + (a + 1) % 3;
      const std::int64_t bl_ = b0 + (b + 2) % 3;
      const std::uint32_t p0 = triangles_[static_cast<std::size_t>(ar)];
      const std::uint32_t pr = triangles_[static_cast<std::size_t>(a)];
      const std::uint32_t pl = triangles_[static_cast<std::size_t>(al)];
      const std::uint32_t p1 = triangles_[static_cast<std::size_t>(bl_)];
      if (incircle_cw(pts[p0], pts[pr], pts[pl], pts[p1]) > 0) {
        triangles_[static_cast<std::size_t>(a)] = p1;
        triangles_[static_cast<std::size_t>(b)] = p0;
        const std::int64_t hbl = halfedges_[static_cast<std::size_t>(bl_)];
        if (hbl == -1) {
          std::uint32_t e = hull_start_;
          do {
            if (hull_tri[e] == bl_) {
              hull_tri[e] = static_cast<std::uint32_t>(a);
              break;
            }
            e = hull_prev[e];
          } while (e != hull_start_);
        }
        link(a, hbl);
        link(b, halfedges_[static_cast<std::size_t>(ar)]);
        link(ar, bl_);
        stack.push_back(b0 + (b + 1) % 3);
      } else {
        if (stack.empty()) break;
        a = stack.back();
        stack.pop_back();
      }
    }
    return ar;
  };

  hull_start_ = i0;
  hull_next_[i0] = hull_prev[i2] = i1;
  hull_next_[i1] = hull_prev[i0] = i2;
  hull_next_[i2] = hull_prev[i1] = i0;
  hull_tri[i0] = 0;
  hull_tri[i1] = 1;
  hull_tri[i2] = 2;
  hull_hash[hash_key(pts[i0])] = i0;
  hull_hash[hash_key(pts[i1])] = i1;
  hull_hash[hash_key(pts[i2])] = i2;
  add_triangle(i0, i1, i2, -1, -1, -1);

  for (const std::uint32_t i : order) {
    if (i == i0 || i == i1 || i == i2) continue;
    const GridPoint& p = pts[i];

    std::uint32_t start = 0;
    const std::size_t k = hash_key(p);
    for (std::size_t j = 0; j < hash_size; ++j) {
      start = hull_hash[(k + j) % hash_size];
      if (start != kNone && start != hull_next_[start]) break;
    }
    start = hull_prev[start];
    std::uint32_t e = start;
    std::uint32_t q = 0;
    while (true) {
      q = hull_next_[e];
      if (sees(p, pts[e], pts[q])) break;
      e = q;
      if (e == start) {
        e = kNone;
        break;
      }
    }
    // Points are processed outward from an empty seed circle, so each new
    // point lies strictly outside the current hull.
    if (e == kNone) throw InvalidArgument("Delaunay: duplicate points");

    std::int64_t t = add_triangle(e, i, hull_next_[e], -1, -1, hull_tri[e]);
    hull_tri[i] = static_cast<std::uint32_t>(legalize(t + 2));
    hull_tri[e] = static_cast<std::uint32_t>(t);

    std::uint32_t next = hull_next_[e];
    while (true) {
      q = hull_next_[next];
      if (!sees(p, pts[next], pts[q])) break;
      t = add_triangle(next, i, q, hull_tri[i], -1, hull_tri[next]);
      hull_tri[i] = static_cast<std::uint32_t>(legalize(t + 2));
      hull_next_[next] = next;  // removed from hull
      next = q;
    }
    if (e == start) {
      while (true) {
        q = hull_prev[e];
        if (!sees(p, pts[q], pts[e])) break;
        t = add_triangle(q, i, e, -1, hull_tri[e], hull_tri[q]);
        legalize(t + 2);
        hull_tri[q] = static_cast<std::uint32_t>(t);
        hull_next_[e] = e;
        e = q;
      }
    }
    hull_start_ = hull_prev[i] = e;
    hull_next_[e] = hull_prev[next] = i;
    hull_next_[i] = next;
    hull_hash[hash_key(p)] = i;
    hull_hash[hash_key(pts[e])] = e;
  }
}

std::vector<std::uint32_t> Delaunay::hull() const {
  std::vector<std::uint32_t> out;
  std::uint32_t e = hull_start_;
  do {
    out.push_back(e);
    e = hull_next_[e];
  } while (e != hull_start_);
  return out;
}

}  // namespace satstereo::gt
