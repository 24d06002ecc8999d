#pragma once

#include <optional>
#include <vector>

#include "drivesim/geom/pose.hpp"

namespace drivesim::sensors {

/// Sensor placement on the ego body: position plus intrinsic Z-Y-X
/// yaw/pitch/roll (radians) of the sensor's forward (+x) axis.
struct Mount {
  Vec3 position = Vec3(0.0, 0.0, 1.5);
  double yaw = 0.0, pitch = 0.0, roll = 0.0;
  geom::Pose body() const { return geom::Pose::from_euler(position, yaw, pitch, roll); }
  bool operator==(const Mount&) const = default;
};

/// Pinhole camera. The optical frame has z forward, x right, y down.
struct CameraModel {
  double fx = 500.0, fy = 500.0, cx = 160.0, cy = 120.0;
  int width = 320, height = 240;
  Mount mount;
  Mat3 exposure_A = Mat3::Identity();
  Vec3 exposure_t = Vec3::Zero();

  void validate() const;
  /// Places the optical frame in the ego frame.
  geom::Pose extrinsic() const;
};

/// Spinning LiDAR. Channel 0 is the top beam; elevations are evenly spaced
/// over [vfov_min, vfov_max] inclusive. Azimuth column j points at j * 2pi / W
/// counter-clockwise from the sensor's +x.
struct LidarModel {
  int channels = 32;
  double vfov_min = -0.4363323129985824;  // -25 deg
  double vfov_max = 0.2617993877991494;   // 15 deg
  int azimuths = 360;
  double max_range = 80.0;
  Mount mount{Vec3(0.0, 0.0, 1.8)};

  void validate() const;
  geom::Pose extrinsic() const { return mount.body(); }
  double elevation(int channel) const;
  double azimuth(int column) const;
  /// Unit direction of a beam in the sensor frame.
  Vec3 direction(int channel, int column) const;
};

struct BevGrid {
  double extent = 32.0;  // half-size, m
  int cells = 64;        // per side
  double split_height = 0.2;
  double clip_max = 5.0;
  void validate() const;
  double cell_size() const { return 2.0 * extent / cells; }
};

struct SensorRig {
  std::vector<CameraModel> cameras;
  LidarModel lidar;
  BevGrid bev;
  int shade_samples = 16;
  int shadow_samples = 16;
  bool include_images = false;
  bool include_points = false;
  void validate() const;
};

}  // namespace drivesim::sensors
