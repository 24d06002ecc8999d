#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "drivesim/common/exec.hpp"
#include "drivesim/common/image.hpp"
#include "drivesim/geom/bvh.hpp"
#include "drivesim/registration/point_cloud.hpp"
#include "drivesim/relight/relight.hpp"
#include "drivesim/scene/compose.hpp"
#include "drivesim/sensors/rig.hpp"

namespace drivesim::sensors {

/// Background geometry and lighting, built once per scenario. The ground
/// quad has mesh id 0; background meshes follow.
struct StaticWorld {
  geom::SceneGeometry background;
  relight::LightMaps light;
  Vec3 sky = Vec3::Zero();
  double ground_z = 0.0;
  static constexpr int kGroundId = 0;
};

/// Unlit background render from the ego's initial pose with the rig cameras
/// (or a default forward camera), used to fit light maps.
std::vector<RgbImage> background_views(const StaticWorld& world, const scene::Scenario& scenario);
StaticWorld build_static_world(const scene::Scenario& scenario);

/// Posed participant meshes at one instant; mesh ids are participant indices.
struct DynamicWorld {
  const scene::WorldSnapshot* snapshot = nullptr;
  std::vector<std::shared_ptr<const geom::SceneGeometry>> locals;  // one per participant

  explicit DynamicWorld(const scene::WorldSnapshot& snap);
  /// Every participant except `exclude` (-1 keeps all).
  geom::SceneGeometry foreground(int exclude) const;
};

struct CameraFrame {
  RgbImage rgb;
  GrayImage depth;  // along the optical axis, 0 = no hit
  GrayImage mask;   // 1 on participant pixels
};

struct RangeImage {
  GrayImage depth;      // channels x azimuths, 0 = no return
  GrayImage intensity;  // [0,1]
};

struct BevHistogram {
  int cells = 0;
  double extent = 0.0;
  std::vector<float> counts;  // (ix * cells + iy) * 2 + bin; ix along ego +x

  float at(int ix, int iy, int bin) const { return counts[(std::size_t(ix) * cells + iy) * 2 + bin]; }
};

struct RenderOptions {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;  // distinguishes cameras, agents and steps
  int observer = -1;         // participant excluded from the foreground, -1 none
  int shade_samples = 16;
  int shadow_samples = 16;
  bool supersample = false;  // 2x2 rays per pixel, depth still from the centre ray
  Exec exec = Exec::parallel;
};

CameraFrame render_camera(const StaticWorld& world, const DynamicWorld& dyn, const geom::SceneGeometry& foreground,
                          const CameraModel& cam, const geom::Pose& ego_pose, const RenderOptions& opt);

/// Background-only unlit render (albedo or sky), depth along the optical axis.
CameraFrame render_background(const StaticWorld& world, const CameraModel& cam, const geom::Pose& ego_pose,
                              Exec exec = Exec::parallel);

RangeImage render_lidar(const StaticWorld& world, const geom::SceneGeometry& foreground, const LidarModel& lidar,
                        const geom::Pose& ego_pose, Exec exec = Exec::parallel);

/// Returns as a point list in the frame of `sensor_pose` (identity: sensor frame).
reg::PointCloud range_image_points(const RangeImage& range, const LidarModel& lidar,
                                   const geom::Pose& sensor_pose = geom::Pose::identity());

/// Bins world-frame points into (channel, azimuth) by nearest beam, keeping
/// the smaller depth; points beyond half a beam spacing outside the vertical
/// field of view or beyond max_range are dropped.
RangeImage reproject_merged(const reg::PointCloud& points, const geom::Pose& sensor_pose, const LidarModel& lidar);

BevHistogram bev_histogram(const std::vector<Vec3>& points, const BevGrid& grid, double ground_z);

/// C' = clamp(A C + t, 0, 1) per pixel.
RgbImage apply_exposure(const RgbImage& img, const Mat3& A, const Vec3& t);

struct SensorFrame {
  std::vector<CameraFrame> cameras;
  RangeImage lidar;
  std::vector<Vec3> points;  // LiDAR returns in the ego frame
  BevHistogram bev;

  /// FNV-1a over every image, range image and histogram buffer.
  std::string digest() const;
};

/// Everything `observer` (index into the snapshot) perceives at this instant;
/// the observer's own body is invisible to its sensors.
SensorFrame render_frame(const StaticWorld& world, const DynamicWorld& dyn, int observer, const SensorRig& rig,
                         const RenderOptions& opt, bool render_cameras = true);

/// Writes <prefix>cam<i>_rgb.ppm, _depth.pfm, _mask.pfm and
/// <prefix>lidar_depth.pfm, lidar_intensity.pfm.
void dump_frame(const SensorFrame& frame, const std::string& prefix);

}  // namespace drivesim::sensors
