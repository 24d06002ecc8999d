#include "drivesim/control/control.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "drivesim/common/error.hpp"

namespace drivesim::control {

void VehicleParams::validate() const {
  if (!(wheelbase > 0)) throw ValidationError("wheelbase must be positive");
  if (!(a_min < 0 && a_max > 0)) throw ValidationError("need a_min < 0 < a_max");
  if (!(steer_max > 0 && steer_rate_max > 0)) throw ValidationError("steering limits must be positive");
}

Eigen::MatrixXd lqr_gains(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                          const Eigen::MatrixXd& R, int max_iters) {
  Eigen::MatrixXd P = Q;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::MatrixXd BtP = B.transpose() * P;
    Eigen::MatrixXd S = R + BtP * B;
    Eigen::MatrixXd K = S.fullPivLu().solve(BtP * A);
    Eigen::MatrixXd next = Q + A.transpose() * P * A - A.transpose() * P * B * K;
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite()) throw RiccatiDivergence("Riccati iteration produced non-finite values");
    double delta = (next - P).cwiseAbs().maxCoeff();
    double scale = std::max(1.0, next.cwiseAbs().maxCoeff());
    P = next;
    if (delta < 1e-9 * scale) {
      Eigen::MatrixXd BtPn = B.transpose() * P;
      return (R + BtPn * B).fullPivLu().solve(BtPn * A);
    }
  }
  throw RiccatiDivergence("Riccati iteration did not converge in " + std::to_string(max_iters) + " iterations");
}

void lateral_model(double v, double dt, double L, Eigen::Matrix2d& A, Eigen::Vector2d& B) {
  A << 1.0, v * dt, 0.0, 1.0;
  B << 0.5 * v * v * dt * dt / L, v * dt / L;
}

void longitudinal_model(double dt, Eigen::Matrix2d& A, Eigen::Vector2d& B) {
  A << 1.0, dt, 0.0, 1.0;
  B << 0.5 * dt * dt, dt;
}

namespace {

using GainKey = std::tuple<int, double, double, double, double, double, double>;

Eigen::RowVector2d cached(const GainKey& key, const Eigen::Matrix2d& A, const Eigen::Vector2d& B,
                          const Eigen::Vector2d& q, double r) {
  static std::mutex mu;
  static std::map<GainKey, Eigen::RowVector2d> cache;
  std::lock_guard lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  Eigen::MatrixXd K = lqr_gains(A, B, q.asDiagonal().toDenseMatrix(), Eigen::MatrixXd::Constant(1, 1, r));
  Eigen::RowVector2d k = K.row(0);
  cache.emplace(key, k);
  return k;
}

}  // namespace

Eigen::RowVector2d lateral_gain(double v, double dt, const VehicleParams& vehicle, const ControllerParams& ctrl) {
  // Scheduled on whole m/s, never below 1 m/s where the lateral model loses controllability.
  int vq = std::max(1, int(std::lround(std::abs(v))));
  Eigen::Matrix2d A;
  Eigen::Vector2d B;
  lateral_model(vq, dt, vehicle.wheelbase, A, B);
  return cached({vq, dt, vehicle.wheelbase, ctrl.q_lat[0], ctrl.q_lat[1], ctrl.r_lat, 0.0}, A, B, ctrl.q_lat,
                ctrl.r_lat);
}

Eigen::RowVector2d longitudinal_gain(double dt, const ControllerParams& ctrl) {
  Eigen::Matrix2d A;
  Eigen::Vector2d B;
  longitudinal_model(dt, A, B);
  return cached({-1, dt, 0.0, ctrl.q_lon[0], ctrl.q_lon[1], ctrl.r_lon, 1.0}, A, B, ctrl.q_lon, ctrl.r_lon);
}

namespace {

struct Deriv {
  double x, y, h;
};

void rk4(EgoState& s, double a, double k, double dt) {
  // k = tan(steering) / wheelbase; speed is linear in time over the step.
  auto f = [&](double tau, double h) {
    double v = s.v + a * tau;
    return Deriv{v * std::cos(h), v * std::sin(h), v * k};
  };
  Deriv k1 = f(0.0, s.heading);
  Deriv k2 = f(0.5 * dt, s.heading + 0.5 * dt * k1.h);
  Deriv k3 = f(0.5 * dt, s.heading + 0.5 * dt * k2.h);
  Deriv k4 = f(dt, s.heading + dt * k3.h);
  s.x += dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
  s.y += dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
  s.heading += dt / 6.0 * (k1.h + 2.0 * k2.h + 2.0 * k3.h + k4.h);
  s.v += a * dt;
}

}  // namespace

EgoState integrate(const EgoState& s, const Controls& u, double dt, const VehicleParams& vehicle) {
  EgoState n = s;
  const double k = std::tan(u.steering) / vehicle.wheelbase;
  double moving = dt;
  if (u.a < 0 && s.v + u.a * dt < 0) moving = std::max(0.0, -s.v / u.a);
  if (moving > 0) rk4(n, u.a, k, moving);
  if (moving < dt) n.v = 0.0;
  n.t = s.t + dt;
  n.heading = wrap_angle(n.heading);
  n.a = u.a;
  n.steering = u.steering;
  return n;
}

TrackResult track_step(const EgoState& s, const scene::Trajectory& plan, const VehicleParams& vehicle,
                       const ControllerParams& ctrl, double dt) {
  if (plan.empty()) throw EmptyPlan("plan has no waypoints");
  const auto ref = scene::sample_extrapolate_front(plan, s.t);
  const auto nxt = scene::sample_extrapolate_front(plan, s.t + dt);

  // Inverse one-step kinematics between the two reference samples.
  const double a_ff = (nxt.v - ref.v) / dt;
  const double arc = ref.v * dt + 0.5 * a_ff * dt * dt;
  const double curvature = std::abs(arc) > 1e-9 ? wrap_angle(nxt.heading - ref.heading) / arc : 0.0;
  const double steer_ff = std::atan(vehicle.wheelbase * curvature);

  const double c = std::cos(ref.heading), sn = std::sin(ref.heading);
  const double dx = s.x - ref.x, dy = s.y - ref.y;
  const Eigen::Vector2d e_lon(c * dx + sn * dy, s.v - ref.v);
  const Eigen::Vector2d e_lat(-sn * dx + c * dy, wrap_angle(s.heading - ref.heading));

  double a = a_ff - longitudinal_gain(dt, ctrl).dot(e_lon);
  double steer = steer_ff - lateral_gain(s.v, dt, vehicle, ctrl).dot(e_lat);

  a = std::clamp(a, vehicle.a_min, vehicle.a_max);
  const double max_delta = vehicle.steer_rate_max * dt;
  steer = std::clamp(steer, s.steering - max_delta, s.steering + max_delta);
  steer = std::clamp(steer, -vehicle.steer_max, vehicle.steer_max);

  TrackResult r;
  r.controls = {a, steer};
  r.next = integrate(s, r.controls, dt, vehicle);
  return r;
}

scene::Trajectory rollout(const EgoState& s0, const std::vector<Controls>& controls, double dt,
                          const VehicleParams& vehicle) {
  scene::Trajectory r;
  EgoState s = s0;
  r.samples.push_back({s.t, s.x, s.y, s.heading, s.v});
  for (std::size_t k = 0; k < controls.size(); ++k) {
    s = integrate(s, controls[k], dt, vehicle);
    s.t = s0.t + double(k + 1) * dt;
    r.samples.push_back({s.t, s.x, s.y, s.heading, s.v});
  }
  return r;
}

}  // namespace drivesim::control
