#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "drivesim/geom/mesh.hpp"
#include "drivesim/geom/pose.hpp"

namespace drivesim::geom {

struct Hit {
  double distance = 0.0;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 albedo = Vec3::Zero();
  int mesh_id = -1;
};

/// Posed meshes (and analytic spheres) under one bounding volume hierarchy.
///
/// Built once with surface-area-heuristic splits, immutable afterwards:
/// queries are const and safe from any number of threads.
class SceneGeometry {
 public:
  static constexpr double kMinDistance = 1e-6;
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  /// Returns the id assigned to the instance (`id` if non-negative).
  int add_mesh(std::shared_ptr<const TriangleMesh> mesh, const Pose& pose, int id = -1);
  int add_sphere(const Vec3& center, double radius, const Vec3& albedo, int id = -1);

  void build();
  bool built() const { return built_; }
  bool empty() const { return prims_.empty(); }
  std::size_t triangle_count() const { return tris_.size(); }
  std::size_t node_count() const { return nodes_.size(); }

  /// Nearest hit with distance in (kMinDistance, t_max].
  std::optional<Hit> ray_cast(const Vec3& origin, const Vec3& direction, double t_max = kInf) const;
  /// True if anything is hit in (kMinDistance, t_max].
  bool occluded(const Vec3& origin, const Vec3& direction, double t_max = kInf) const;

  /// Linear scan over every primitive; serial reference for the BVH.
  std::optional<Hit> ray_cast_brute(const Vec3& origin, const Vec3& direction, double t_max = kInf) const;

 private:
  struct Instance {
    std::shared_ptr<const TriangleMesh> mesh;
    Pose pose;
    int id;
  };
  struct Tri {
    Vec3 p0, e1, e2;
    std::uint32_t instance;
    std::uint32_t face;
  };
  struct Sphere {
    Vec3 center;
    double radius;
    Vec3 albedo;
    int id;
  };
  struct Node {
    Eigen::Vector3d lo, hi;
    std::uint32_t first;  // child index (inner) or first prim (leaf)
    std::uint32_t count;  // 0 for inner nodes
  };
  struct Candidate {
    double t = kInf;
    std::uint32_t prim = 0;
    double u = 0.0, v = 0.0;
    bool found = false;
  };

  void intersect_prim(std::uint32_t prim, const Vec3& o, const Vec3& d, Candidate& best) const;
  Hit finish(const Candidate& c, const Vec3& o, const Vec3& d) const;
  void build_node(std::uint32_t node, std::uint32_t begin, std::uint32_t end, const std::vector<Eigen::Vector3d>& lo,
                  const std::vector<Eigen::Vector3d>& hi, const std::vector<Eigen::Vector3d>& centroid);
  template <bool AnyHit>
  void traverse(const Vec3& o, const Vec3& d, Candidate& best) const;

  std::vector<Instance> instances_;
  std::vector<Tri> tris_;
  std::vector<Sphere> spheres_;
  std::vector<std::uint32_t> prims_;  // < tris_.size(): triangle, else sphere
  std::vector<Node> nodes_;
  int next_id_ = 0;
  bool built_ = false;
};

/// Free-function form of SceneGeometry::ray_cast.
inline std::optional<Hit> ray_cast(const SceneGeometry& scene, const Vec3& origin, const Vec3& direction) {
  return scene.ray_cast(origin, direction);
}

}  // namespace drivesim::geom
