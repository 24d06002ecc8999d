#pragma once

#include <Eigen/Geometry>

#include "drivesim/common/math.hpp"

namespace drivesim::geom {

/// Rigid transform placing a body frame in the world frame.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  /// Planar pose: yaw about +z, optional height.
  static Pose planar(double x, double y, double yaw, double z = 0.0);
  /// Intrinsic Z-Y-X (yaw, pitch, roll).
  static Pose from_euler(const Vec3& t, double yaw, double pitch, double roll);

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 rotate(const Vec3& d) const { return rotation * d; }
  Pose inverse() const;
  double yaw() const;

  /// Orthonormal with determinant +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

/// a ∘ b: first b, then a.
Pose compose(const Pose& a, const Pose& b);
inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

}  // namespace drivesim::geom
