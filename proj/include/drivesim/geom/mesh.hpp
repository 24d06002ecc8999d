#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "drivesim/common/math.hpp"

namespace drivesim::geom {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::vector<Vec3> normals;  // per vertex, unit
  std::vector<Vec3> albedo;   // one entry (uniform) or one per vertex

  /// Throws ValidationError if indices are out of range, normals are not
  /// unit, albedo is outside [0,1] or the mesh has no faces.
  void validate() const;

  /// Area-weighted vertex normals from the faces.
  void compute_normals();

  Vec3 albedo_at(std::size_t face, double u, double v) const;
  Vec3 normal_at(std::size_t face, double u, double v) const;
  Vec3 face_normal(std::size_t face) const;
};

/// Axis-aligned box with flat-shaded faces, bottom face at z = 0.
TriangleMesh make_box(const Vec3& half_extents, const Vec3& albedo);
/// Square in the z = height plane facing +z.
TriangleMesh make_quad(double half_size, double height, const Vec3& albedo);
/// Open cylinder wall around the z axis with inward-facing normals.
TriangleMesh make_cylinder_wall(double radius, double z0, double z1, int segments, const Vec3& albedo);
/// Box body plus a narrower cabin on top; footprint length x width.
TriangleMesh make_vehicle(double length, double width, double height, const Vec3& albedo);

/// ASCII mesh format, see docs/mesh_format.md.
TriangleMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);

}  // namespace drivesim::geom
