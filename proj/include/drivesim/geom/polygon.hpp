#pragma once

#include <vector>

#include "drivesim/geom/box2d.hpp"

namespace drivesim::geom {

/// Simple polygon; orientation is free.
struct Polygon2D {
  std::vector<Vec2> ring;

  double signed_area() const;
  /// Boundary-inclusive point test.
  bool contains(const Vec2& p, double tol = 1e-9) const;
  void validate() const;
  bool operator==(const Polygon2D&) const = default;
};

/// All four corners and the center inside or on the boundary.
bool footprint_in_polygon(const OrientedBox2D& box, const Polygon2D& area);

/// Sutherland-Hodgman clip of `subject` against a convex CCW `clip` polygon.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip);
double polygon_area(const std::vector<Vec2>& ring);

/// Open polyline with arc-length parameterization.
struct Polyline {
  std::vector<Vec2> points;

  double length() const;
  /// Arc length of the closest point on the polyline.
  double project(const Vec2& p) const;
  Vec2 point_at(double s) const;
  /// Tangent heading at arc length s (segment direction).
  double heading_at(double s) const;
  void validate() const;
  bool operator==(const Polyline&) const = default;
};

/// Polygon enclosing the band of half-width `half_width` around `line`.
Polygon2D buffer_polyline(const Polyline& line, double half_width);

}  // namespace drivesim::geom
