#include "drivesim/sensors/rig.hpp"

#include "drivesim/common/error.hpp"

namespace drivesim::sensors {

void CameraModel::validate() const {
  if (!(fx > 0 && fy > 0)) throw InvalidRig("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidRig("camera resolution must be positive");
  if (!(cx > 0 && cx < width && cy > 0 && cy < height)) throw InvalidRig("camera principal point outside the image");
  if (!mount.position.allFinite()) throw InvalidRig("camera mount is not finite");
  if (!exposure_A.allFinite() || !exposure_t.allFinite()) throw InvalidRig("camera exposure is not finite");
}

geom::Pose CameraModel::extrinsic() const {
  geom::Pose body = mount.body();
  // Optical axes in body coordinates (body: x forward, y left, z up).
  Mat3 optical;
  optical.col(0) = -Vec3::UnitY();
  optical.col(1) = -Vec3::UnitZ();
  optical.col(2) = Vec3::UnitX();
  body.rotation = body.rotation * optical;
  return body;
}

void LidarModel::validate() const {
  if (channels < 1) throw InvalidRig("lidar needs at least one channel");
  if (azimuths < 1) throw InvalidRig("lidar needs at least one azimuth column");
  if (!(max_range > 0)) throw InvalidRig("lidar max_range must be positive");
  if (channels > 1 && !(vfov_max > vfov_min)) throw InvalidRig("lidar vertical field of view is empty");
  if (!(vfov_min > -kPi / 2 && vfov_max < kPi / 2)) throw InvalidRig("lidar vertical field of view out of range");
  if (!mount.position.allFinite()) throw InvalidRig("lidar mount is not finite");
}

double LidarModel::elevation(int channel) const {
  if (channels == 1) return 0.5 * (vfov_min + vfov_max);
  return vfov_max - (vfov_max - vfov_min) * double(channel) / double(channels - 1);
}

double LidarModel::azimuth(int column) const { return 2.0 * kPi * double(column) / double(azimuths); }

Vec3 LidarModel::direction(int channel, int column) const {
  double el = elevation(channel), az = azimuth(column);
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

void BevGrid::validate() const {
  if (!(extent > 0) || cells < 1) throw InvalidRig("BEV grid must have positive extent and cells");
  if (!(clip_max > 0)) throw InvalidRig("BEV clip_max must be positive");
}

void SensorRig::validate() const {
  for (const auto& c : cameras) c.validate();
  lidar.validate();
  bev.validate();
  if (shade_samples < 1 || shadow_samples < 1) throw InvalidRig("sample counts must be at least 1");
}

}  // namespace drivesim::sensors
