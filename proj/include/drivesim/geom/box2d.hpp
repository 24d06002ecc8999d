#pragma once

#include <array>

#include "drivesim/common/math.hpp"

namespace drivesim::geom {

struct OrientedBox2D {
  Vec2 center = Vec2::Zero();
  double heading = 0.0;
  Vec2 half_extents = Vec2(1.0, 1.0);  // along heading, across heading

  /// Counter-clockwise, starting at the front-right corner.
  std::array<Vec2, 4> corners() const;
  double area() const { return 4.0 * half_extents.x() * half_extents.y(); }
};

/// Separating-axis test; true iff the intersection has positive area.
bool boxes_overlap(const OrientedBox2D& a, const OrientedBox2D& b);

/// Area of a ∩ b by convex polygon clipping.
double intersection_area(const OrientedBox2D& a, const OrientedBox2D& b);

double oriented_iou(const OrientedBox2D& a, const OrientedBox2D& b);

}  // namespace drivesim::geom
