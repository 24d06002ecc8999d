#pragma once

namespace drivesim::score {

struct ComfortBounds {
  double a_lon_min = -4.05;
  double a_lon_max = 2.40;
  double a_lat_max = 4.89;
  double jerk_max = 8.37;
  double yaw_rate_max = 0.95;
  double yaw_acc_max = 1.93;
  bool operator==(const ComfortBounds&) const = default;
};

struct ScoreConfig {
  double w_ep = 5.0;
  double w_ttc = 5.0;
  double w_c = 2.0;
  double ttc_threshold = 1.0;  // s
  double ttc_horizon = 3.0;    // s
  ComfortBounds comfort;
  /// Excuse collisions where the ego is stopped and hit from behind.
  bool at_fault_exclusion = false;

  void validate() const;
  bool operator==(const ScoreConfig&) const = default;
};

}  // namespace drivesim::score
