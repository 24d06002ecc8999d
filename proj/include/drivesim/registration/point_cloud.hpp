#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "drivesim/geom/box2d.hpp"
#include "drivesim/geom/pose.hpp"

namespace drivesim::reg {

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<float> intensity;  // empty, or one value per point in [0,1]
  std::string frame_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void validate() const;
};

PointCloud transform(const PointCloud& cloud, const geom::Pose& pose);

/// Binary little-endian: u32 count, then count x (f32 x, y, z, intensity).
PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);

struct Aabb3 {
  Vec3 lo = Vec3::Constant(-1e9);
  Vec3 hi = Vec3::Constant(1e9);
  bool contains(const Vec3& p) const { return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all(); }
};

struct FrameAnnotations {
  struct DynamicBox {
    geom::OrientedBox2D box;
    double z_min = -1e9;
    double z_max = 1e9;
  };
  std::vector<DynamicBox> dynamic_boxes;
  double ground_height = 0.0;
  Aabb3 crop_region;

  void validate() const;
};

/// Text format (one record per line, '#' comments):
///   crop xmin ymin zmin xmax ymax zmax   -- default crop for following frames
///   frame <index>
///   ground <z>
///   crop ...                             -- inside a frame: that frame only
///   box cx cy heading half_length half_width zmin zmax
std::vector<FrameAnnotations> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, const std::vector<FrameAnnotations>& frames);

}  // namespace drivesim::reg
