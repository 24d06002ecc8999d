#include "drivesim/geom/box2d.hpp"

#include <algorithm>
#include <vector>

#include "drivesim/geom/polygon.hpp"

namespace drivesim::geom {

std::array<Vec2, 4> OrientedBox2D::corners() const {
  const Vec2 f(std::cos(heading), std::sin(heading));
  const Vec2 l(-f.y(), f.x());
  const Vec2 df = half_extents.x() * f;
  const Vec2 dl = half_extents.y() * l;
  return {center + df - dl, center + df + dl, center - df + dl, center - df - dl};
}

namespace {

void project(const std::array<Vec2, 4>& pts, const Vec2& axis, double& lo, double& hi) {
  lo = hi = pts[0].dot(axis);
  for (int i = 1; i < 4; ++i) {
    const double p = pts[i].dot(axis);
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
}

}  // namespace

bool boxes_overlap(const OrientedBox2D& a, const OrientedBox2D& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const Vec2 axes[4] = {{std::cos(a.heading), std::sin(a.heading)},
                        {-std::sin(a.heading), std::cos(a.heading)},
                        {std::cos(b.heading), std::sin(b.heading)},
                        {-std::sin(b.heading), std::cos(b.heading)}};
  for (const auto& axis : axes) {
    double alo, ahi, blo, bhi;
    project(ca, axis, alo, ahi);
    project(cb, axis, blo, bhi);
    // Touching projections give zero-area contact, which is not an overlap.
    if (ahi <= blo || bhi <= alo) return false;
  }
  return true;
}

double intersection_area(const OrientedBox2D& a, const OrientedBox2D& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::vector<Vec2> pa(ca.begin(), ca.end());
  const std::vector<Vec2> pb(cb.begin(), cb.end());
  return std::abs(polygon_area(clip_convex(pa, pb)));
}

double oriented_iou(const OrientedBox2D& a, const OrientedBox2D& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace drivesim::geom
