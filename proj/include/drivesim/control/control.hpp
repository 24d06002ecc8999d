#pragma once

#include <vector>

#include <Eigen/Core>

#include "drivesim/scene/trajectory.hpp"

namespace drivesim::control {

struct EgoState {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double v = 0.0;
  double a = 0.0;         // longitudinal
  double steering = 0.0;  // front wheel angle
  bool operator==(const EgoState&) const = default;
};

struct VehicleParams {
  double wheelbase = 2.7;
  double steer_max = 0.6;
  double a_min = -6.0;
  double a_max = 3.0;
  double steer_rate_max = 0.8;
  void validate() const;
  bool operator==(const VehicleParams&) const = default;
};

struct ControllerParams {
  Eigen::Vector2d q_lat{1.0, 0.5};  // cross-track, heading
  double r_lat = 2.0;
  Eigen::Vector2d q_lon{1.0, 1.0};  // station, speed
  double r_lon = 1.0;
  bool operator==(const ControllerParams&) const = default;
};

struct Controls {
  double a = 0.0;
  double steering = 0.0;
  bool operator==(const Controls&) const = default;
};

/// Stabilizing gain K (u = -K x) from the discrete algebraic Riccati
/// equation, solved by fixed-point iteration until the largest change in P
/// is below 1e-9 relative to max(1, |P|). Throws RiccatiDivergence.
Eigen::MatrixXd lqr_gains(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                          const Eigen::MatrixXd& R, int max_iters = 200000);

/// Lateral error model (cross-track, heading) driven by steering at speed v.
void lateral_model(double v, double dt, double wheelbase, Eigen::Matrix2d& A, Eigen::Vector2d& B);
/// Longitudinal error model (station, speed) driven by acceleration.
void longitudinal_model(double dt, Eigen::Matrix2d& A, Eigen::Vector2d& B);

/// Scheduled gains, memoized per (rounded speed, dt, params).
Eigen::RowVector2d lateral_gain(double v, double dt, const VehicleParams& vehicle, const ControllerParams& ctrl);
Eigen::RowVector2d longitudinal_gain(double dt, const ControllerParams& ctrl);

/// One dt of the kinematic bicycle under constant controls (RK4). Speed stops
/// at zero instead of reversing; heading is wrapped to (-pi, pi].
EgoState integrate(const EgoState& s, const Controls& u, double dt, const VehicleParams& vehicle);

/// Open-loop integration of a control sequence; sample k is at s0.t + k dt.
scene::Trajectory rollout(const EgoState& s0, const std::vector<Controls>& controls, double dt,
                          const VehicleParams& vehicle);

struct TrackResult {
  Controls controls;
  EgoState next;
};

/// Feedforward from the plan between t and t+dt plus decoupled LQR feedback
/// on the error to the plan at t; saturated and rate limited, then integrated.
TrackResult track_step(const EgoState& state, const scene::Trajectory& plan, const VehicleParams& vehicle,
                       const ControllerParams& ctrl, double dt);

}  // namespace drivesim::control
