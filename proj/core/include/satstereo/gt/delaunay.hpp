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
#include <span>
#include <vector>

namespace satstereo::gt {

struct GridPoint {
  std::int32_t x = 0;
  std::int32_t y = 0;
};

/// Delaunay triangulation of distinct integer points (sweep-hull insertion
/// followed by Lawson edge flips). Orientation and in-circle predicates are
/// evaluated exactly in 128-bit integer arithmetic, so the outer boundary is
/// exactly the convex hull. Coordinates must satisfy |x|, |y| < 2^19.
///
/// Throws Degeneracy when fewer than three non-collinear points are given and
/// InvalidArgument on duplicates or out-of-range coordinates.
class Delaunay {
 public:
  explicit Delaunay(std::span<const GridPoint> points);

  /// Vertex indices, three per triangle, all with the same orientation.
  const std::vector<std::uint32_t>& triangles() const noexcept { return triangles_; }
  std::size_t triangle_count() const noexcept { return triangles_.size() / 3; }
  /// Indices of hull vertices in boundary order.
  std::vector<std::uint32_t> hull() const;

 private:
  std::vector<std::uint32_t> triangles_;
  std::vector<std::int64_t> halfedges_;
  std::vector<std::uint32_t> hull_next_;
  std::uint32_t hull_start_ = 0;
};

/// Exact twice-signed-area of (a, b, c); positive when counter-clockwise in a
/// y-up frame.
std::int64_t orient2d(const GridPoint& a, const GridPoint& b, const GridPoint& c) noexcept;

}  // namespace satstereo::gt
