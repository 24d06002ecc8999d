#include "drivesim/geom/polygon.hpp"

#include <algorithm>
#include <limits>

#include "drivesim/common/error.hpp"

namespace drivesim::geom {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + s * ab - p).norm();
}

int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
  const int o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  auto on_seg = [](const Vec2& a, const Vec2& b, const Vec2& c) {
    return std::min(a.x(), b.x()) <= c.x() && c.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= c.y() &&
           c.y() <= std::max(a.y(), b.y());
  };
  return (o1 == 0 && on_seg(p1, p2, q1)) || (o2 == 0 && on_seg(p1, p2, q2)) || (o3 == 0 && on_seg(q1, q2, p1)) ||
         (o4 == 0 && on_seg(q1, q2, p2));
}

}  // namespace

double polygon_area(const std::vector<Vec2>& ring) {
  double a = 0.0;
  for (std::size_t i = 0, n = ring.size(); i < n; ++i) a += cross(ring[i], ring[(i + 1) % n]);
  return 0.5 * a;
}

double Polygon2D::signed_area() const { return polygon_area(ring); }

bool Polygon2D::contains(const Vec2& p, double tol) const {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i)
    if (segment_distance(p, ring[i], ring[(i + 1) % n]) <= tol) return true;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = ring[i];
    const Vec2& b = ring[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

void Polygon2D::validate() const {
  if (ring.size() < 3) throw ValidationError("polygon needs at least 3 vertices");
  for (const auto& p : ring)
    if (!p.allFinite()) throw ValidationError("polygon vertex is not finite");
  if (std::abs(signed_area()) <= 1e-12) throw ValidationError("polygon has zero area");
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;  // adjacent edges share a vertex
      if (segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]))
        throw ValidationError("polygon is self-intersecting");
    }
  }
}

bool footprint_in_polygon(const OrientedBox2D& box, const Polygon2D& area) {
  if (!area.contains(box.center)) return false;
  for (const auto& c : box.corners())
    if (!area.contains(c)) return false;
  return true;
}

std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip) {
  std::vector<Vec2> out = subject;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % m];
    const Vec2 ab = b - a;
    std::vector<Vec2> in = std::move(out);
    out.clear();
    for (std::size_t i = 0, n = in.size(); i < n; ++i) {
      const Vec2& p = in[i];
      const Vec2& q = in[(i + 1) % n];
      const double dp = cross(ab, p - a);
      const double dq = cross(ab, q - a);
      if (dp >= 0.0) out.push_back(p);
      if ((dp >= 0.0) != (dq >= 0.0)) {
        const double s = dp / (dp - dq);
        out.push_back(p + s * (q - p));
      }
    }
  }
  return out;
}

double Polyline::length() const {
  double l = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) l += (points[i] - points[i - 1]).norm();
  return l;
}

double Polyline::project(const Vec2& p) const {
  double best = std::numeric_limits<double>::infinity();
  double best_s = 0.0, acc = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const Vec2 ab = points[i] - points[i - 1];
    const double len = ab.norm();
    if (len <= 0.0) continue;
    const double s = std::clamp((p - points[i - 1]).dot(ab) / (len * len), 0.0, 1.0);
    const double d = (points[i - 1] + s * ab - p).squaredNorm();
    if (d < best) {
      best = d;
      best_s = acc + s * len;
    }
    acc += len;
  }
  return best_s;
}

Vec2 Polyline::point_at(double s) const {
  if (points.empty()) return Vec2::Zero();
  if (s <= 0.0) return points.front();
  double acc = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double len = (points[i] - points[i - 1]).norm();
    if (acc + len >= s && len > 0.0) return points[i - 1] + (s - acc) / len * (points[i] - points[i - 1]);
    acc += len;
  }
  return points.back();
}

double Polyline::heading_at(double s) const {
  double acc = 0.0;
  std::size_t seg = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double len = (points[i] - points[i - 1]).norm();
    if (len <= 0.0) continue;
    seg = i;
    if (acc + len >= s) break;
    acc += len;
  }
  if (seg == 0) return 0.0;
  const Vec2 d = points[seg] - points[seg - 1];
  return std::atan2(d.y(), d.x());
}

void Polyline::validate() const {
  if (points.size() < 2) throw ValidationError("polyline needs at least 2 points");
  for (const auto& p : points)
    if (!p.allFinite()) throw ValidationError("polyline point is not finite");
  if (!(length() > 0.0)) throw ValidationError("polyline arc length must be positive");
}

Polygon2D buffer_polyline(const Polyline& line, double half_width) {
  const auto& pts = line.points;
  const std::size_t n = pts.size();
  std::vector<Vec2> left, right;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 din = i > 0 ? Vec2((pts[i] - pts[i - 1]).normalized()) : Vec2((pts[1] - pts[0]).normalized());
    const Vec2 dout = i + 1 < n ? Vec2((pts[i + 1] - pts[i]).normalized()) : din;
    Vec2 t = din + dout;
    t = t.norm() > 1e-12 ? Vec2(t.normalized()) : dout;
    const Vec2 normal(-t.y(), t.x());
    // Miter offset keeps the band width constant across bends.
    const double cos_half = std::max(0.2, normal.dot(Vec2(-dout.y(), dout.x())));
    left.push_back(pts[i] + half_width / cos_half * normal);
    right.push_back(pts[i] - half_width / cos_half * normal);
  }
  Polygon2D poly;
  poly.ring = std::move(right);
  poly.ring.insert(poly.ring.end(), left.rbegin(), left.rend());
  return poly;
}

}  // namespace drivesim::geom
