#include "drivesim/geom/bvh.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "drivesim/common/error.hpp"

namespace drivesim::geom {

namespace {

constexpr int kBins = 12;
constexpr std::uint32_t kLeafSize = 4;
constexpr double kTraversalCost = 1.0;

double half_area(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  const Eigen::Vector3d e = (hi - lo).cwiseMax(0.0);
  return e.x() * e.y() + e.y() * e.z() + e.z() * e.x();
}

struct Bounds {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(SceneGeometry::kInf);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(-SceneGeometry::kInf);
  void grow(const Eigen::Vector3d& l, const Eigen::Vector3d& h) {
    lo = lo.cwiseMin(l);
    hi = hi.cwiseMax(h);
  }
  void grow(const Eigen::Vector3d& p) { grow(p, p); }
  bool valid() const { return (lo.array() <= hi.array()).all(); }
};

// Slab test returning the entry distance, or +inf on a miss.
inline double hit_box(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, const Vec3& o, const Vec3& inv,
                      double t_max) {
  double t0 = SceneGeometry::kMinDistance, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    double tn = (lo[a] - o[a]) * inv[a];
    double tf = (hi[a] - o[a]) * inv[a];
    if (tn > tf) std::swap(tn, tf);
    // NaN arises only for a zero direction with the origin on the slab plane; treat as inside.
    t0 = std::fmax(t0, tn);
    t1 = std::fmin(t1, tf);
  }
  return t0 <= t1 ? t0 : SceneGeometry::kInf;
}

}  // namespace

int SceneGeometry::add_mesh(std::shared_ptr<const TriangleMesh> mesh, const Pose& pose, int id) {
  if (!mesh) throw ValidationError("null mesh");
  mesh->validate();
  if (id < 0) id = next_id_;
  next_id_ = std::max(next_id_, id + 1);
  instances_.push_back({std::move(mesh), pose, id});
  built_ = false;
  return id;
}

int SceneGeometry::add_sphere(const Vec3& center, double radius, const Vec3& albedo, int id) {
  if (!(radius > 0.0)) throw ValidationError("sphere radius must be positive");
  if (id < 0) id = next_id_;
  next_id_ = std::max(next_id_, id + 1);
  spheres_.push_back({center, radius, albedo, id});
  built_ = false;
  return id;
}

void SceneGeometry::build() {
  tris_.clear();
  for (std::uint32_t i = 0; i < instances_.size(); ++i) {
    const auto& inst = instances_[i];
    const auto& m = *inst.mesh;
    for (std::uint32_t f = 0; f < m.faces.size(); ++f) {
      const Vec3 a = inst.pose.apply(m.vertices[m.faces[f][0]]);
      const Vec3 b = inst.pose.apply(m.vertices[m.faces[f][1]]);
      const Vec3 c = inst.pose.apply(m.vertices[m.faces[f][2]]);
      tris_.push_back({a, b - a, c - a, i, f});
    }
  }
  const auto n = static_cast<std::uint32_t>(tris_.size() + spheres_.size());
  prims_.resize(n);
  std::vector<Eigen::Vector3d> lo(n), hi(n), centroid(n);
  for (std::uint32_t p = 0; p < n; ++p) {
    prims_[p] = p;
    if (p < tris_.size()) {
      const auto& t = tris_[p];
      Bounds b;
      b.grow(t.p0);
      b.grow(t.p0 + t.e1);
      b.grow(t.p0 + t.e2);
      lo[p] = b.lo;
      hi[p] = b.hi;
    } else {
      const auto& s = spheres_[p - tris_.size()];
      lo[p] = s.center.array() - s.radius;
      hi[p] = s.center.array() + s.radius;
    }
    centroid[p] = 0.5 * (lo[p] + hi[p]);
  }
  nodes_.clear();
  if (n > 0) {
    nodes_.reserve(2 * n);
    nodes_.push_back({});
    build_node(0, 0, n, lo, hi, centroid);
  }
  built_ = true;
}

void SceneGeometry::build_node(std::uint32_t node, std::uint32_t begin, std::uint32_t end,
                               const std::vector<Eigen::Vector3d>& lo, const std::vector<Eigen::Vector3d>& hi,
                               const std::vector<Eigen::Vector3d>& centroid) {
  Bounds box, cbox;
  for (auto i = begin; i < end; ++i) {
    box.grow(lo[prims_[i]], hi[prims_[i]]);
    cbox.grow(centroid[prims_[i]]);
  }
  nodes_[node].lo = box.lo;
  nodes_[node].hi = box.hi;
  const std::uint32_t count = end - begin;
  auto make_leaf = [&] {
    nodes_[node].first = begin;
    nodes_[node].count = count;
  };
  if (count <= kLeafSize) return make_leaf();

  // Binned SAH over all three axes.
  int best_axis = -1, best_split = -1;
  double best_cost = SceneGeometry::kInf;
  const Eigen::Vector3d extent = cbox.hi - cbox.lo;
  for (int axis = 0; axis < 3; ++axis) {
    if (extent[axis] <= 0.0) continue;
    std::array<Bounds, kBins> bins;
    std::array<std::uint32_t, kBins> counts{};
    const double scale = kBins / extent[axis];
    for (auto i = begin; i < end; ++i) {
      const auto p = prims_[i];
      const int b = std::min(kBins - 1, static_cast<int>((centroid[p][axis] - cbox.lo[axis]) * scale));
      bins[b].grow(lo[p], hi[p]);
      ++counts[b];
    }
    std::array<double, kBins - 1> left_cost{};
    Bounds acc;
    std::uint32_t acc_n = 0;
    for (int b = 0; b < kBins - 1; ++b) {
      if (counts[b]) acc.grow(bins[b].lo, bins[b].hi);
      acc_n += counts[b];
      left_cost[b] = acc_n ? acc_n * half_area(acc.lo, acc.hi) : 0.0;
    }
    acc = Bounds{};
    acc_n = 0;
    for (int b = kBins - 1; b > 0; --b) {
      if (counts[b]) acc.grow(bins[b].lo, bins[b].hi);
      acc_n += counts[b];
      const double cost = left_cost[b - 1] + (acc_n ? acc_n * half_area(acc.lo, acc.hi) : 0.0);
      if (acc_n > 0 && acc_n < count && cost < best_cost) {
        best_cost = cost;
        best_axis = axis;
        best_split = b;
      }
    }
  }

  const double leaf_cost = count * half_area(box.lo, box.hi);
  std::uint32_t mid;
  if (best_axis < 0) {
    if (count <= 4 * kLeafSize) return make_leaf();
    mid = begin + count / 2;  // all centroids coincide
  } else {
    if (kTraversalCost * half_area(box.lo, box.hi) + best_cost >= leaf_cost && count <= 4 * kLeafSize)
      return make_leaf();
    const double scale = kBins / extent[best_axis];
    auto it = std::stable_partition(prims_.begin() + begin, prims_.begin() + end, [&](std::uint32_t p) {
      return std::min(kBins - 1, static_cast<int>((centroid[p][best_axis] - cbox.lo[best_axis]) * scale)) <
             best_split;
    });
    mid = static_cast<std::uint32_t>(it - prims_.begin());
    if (mid == begin || mid == end) mid = begin + count / 2;
  }

  const auto left = static_cast<std::uint32_t>(nodes_.size());
  nodes_[node].first = left;
  nodes_[node].count = 0;
  nodes_.push_back({});
  nodes_.push_back({});
  build_node(left, begin, mid, lo, hi, centroid);
  build_node(left + 1, mid, end, lo, hi, centroid);
}

void SceneGeometry::intersect_prim(std::uint32_t prim, const Vec3& o, const Vec3& d, Candidate& best) const {
  if (prim < tris_.size()) {
    // Moller-Trumbore, two-sided.
    const auto& tri = tris_[prim];
    const Vec3 pvec = d.cross(tri.e2);
    const double det = tri.e1.dot(pvec);
    if (std::abs(det) < 1e-14) return;
    const double inv_det = 1.0 / det;
    const Vec3 tvec = o - tri.p0;
    const double u = tvec.dot(pvec) * inv_det;
    // Slack on the barycentric bounds keeps shared edges watertight.
    constexpr double kEdge = 1e-9;
    if (u < -kEdge || u > 1.0 + kEdge) return;
    const Vec3 qvec = tvec.cross(tri.e1);
    const double v = d.dot(qvec) * inv_det;
    if (v < -kEdge || u + v > 1.0 + kEdge) return;
    const double t = tri.e2.dot(qvec) * inv_det;
    if (t > kMinDistance && t < best.t) best = {t, prim, u, v, true};
  } else {
    const auto& s = spheres_[prim - tris_.size()];
    const Vec3 oc = o - s.center;
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0.0) return;
    const double root = std::sqrt(disc);
    double t = -b - root;
    if (t <= kMinDistance) t = -b + root;
    if (t > kMinDistance && t < best.t) best = {t, prim, 0.0, 0.0, true};
  }
}

template <bool AnyHit>
void SceneGeometry::traverse(const Vec3& o, const Vec3& d, Candidate& best) const {
  if (nodes_.empty()) return;
  const Vec3 inv = d.cwiseInverse();
  std::array<std::uint32_t, 64> stack;
  int top = 0;
  if (hit_box(nodes_[0].lo, nodes_[0].hi, o, inv, best.t) == kInf) return;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (n.count > 0) {
      for (std::uint32_t i = n.first; i < n.first + n.count; ++i) {
        intersect_prim(prims_[i], o, d, best);
        if (AnyHit && best.found) return;
      }
      continue;
    }
    const std::uint32_t a = n.first, b = n.first + 1;
    const double ta = hit_box(nodes_[a].lo, nodes_[a].hi, o, inv, best.t);
    const double tb = hit_box(nodes_[b].lo, nodes_[b].hi, o, inv, best.t);
    // Push the farther child first so the nearer one is popped next.
    if (ta <= tb) {
      if (tb < kInf) stack[top++] = b;
      if (ta < kInf) stack[top++] = a;
    } else {
      if (ta < kInf) stack[top++] = a;
      if (tb < kInf) stack[top++] = b;
    }
  }
}

Hit SceneGeometry::finish(const Candidate& c, const Vec3& o, const Vec3& d) const {
  Hit h;
  h.distance = c.t;
  h.point = o + c.t * d;
  if (c.prim < tris_.size()) {
    const auto& tri = tris_[c.prim];
    const auto& inst = instances_[tri.instance];
    h.normal = (inst.pose.rotation * inst.mesh->normal_at(tri.face, c.u, c.v)).normalized();
    h.albedo = inst.mesh->albedo_at(tri.face, c.u, c.v);
    h.mesh_id = inst.id;
  } else {
    const auto& s = spheres_[c.prim - tris_.size()];
    h.normal = (h.point - s.center).normalized();
    h.albedo = s.albedo;
    h.mesh_id = s.id;
  }
  return h;
}

namespace {
// Upper bound such that hits at exactly t_max are still accepted.
double inclusive_limit(double t_max) { return t_max < SceneGeometry::kInf ? std::nextafter(t_max, SceneGeometry::kInf) : t_max; }
}  // namespace

std::optional<Hit> SceneGeometry::ray_cast(const Vec3& origin, const Vec3& direction, double t_max) const {
  if (!built_) throw ValidationError("SceneGeometry::build() must be called before queries");
  Candidate best;
  best.t = inclusive_limit(t_max);
  traverse<false>(origin, direction, best);
  if (!best.found) return std::nullopt;
  return finish(best, origin, direction);
}

bool SceneGeometry::occluded(const Vec3& origin, const Vec3& direction, double t_max) const {
  if (!built_) throw ValidationError("SceneGeometry::build() must be called before queries");
  Candidate best;
  best.t = inclusive_limit(t_max);
  traverse<true>(origin, direction, best);
  return best.found;
}

std::optional<Hit> SceneGeometry::ray_cast_brute(const Vec3& origin, const Vec3& direction, double t_max) const {
  if (!built_) throw ValidationError("SceneGeometry::build() must be called before queries");
  Candidate best;
  best.t = inclusive_limit(t_max);
  const auto n = static_cast<std::uint32_t>(tris_.size() + spheres_.size());
  for (std::uint32_t p = 0; p < n; ++p) intersect_prim(p, origin, direction, best);
  if (!best.found) return std::nullopt;
  return finish(best, origin, direction);
}

}  // namespace drivesim::geom
