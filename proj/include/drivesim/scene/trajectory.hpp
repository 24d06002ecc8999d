#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "drivesim/geom/pose.hpp"

namespace drivesim::scene {

struct TrajectorySample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double v = 0.0;
  bool operator==(const TrajectorySample&) const = default;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  const TrajectorySample& front() const { return samples.front(); }
  const TrajectorySample& back() const { return samples.back(); }
  /// Strictly increasing t, finite values. `min_samples` defaults to the
  /// interpolation requirement.
  void validate(std::size_t min_samples = 2) const;
  bool operator==(const Trajectory&) const = default;
};

/// Linear position and speed, shortest-arc heading; clamped to the end
/// samples outside [t0, t_end]. Throws EmptyTrajectory.
TrajectorySample sample(const Trajectory& traj, double t);
std::pair<geom::Pose, double> sample_pose(const Trajectory& traj, double t);

/// Like `sample`, but extends the first segment backwards for t < t0.
TrajectorySample sample_extrapolate_front(const Trajectory& traj, double t);

/// CSV with header t,x,y,heading,v.
Trajectory read_trajectory_csv(const std::filesystem::path& path);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

}  // namespace drivesim::scene
