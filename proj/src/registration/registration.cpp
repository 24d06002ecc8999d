#include "drivesim/registration/registration.hpp"

#include <array>
#include <exception>

#include <Eigen/Eigenvalues>

#include "drivesim/common/error.hpp"
#include "drivesim/registration/kdtree.hpp"

namespace drivesim::reg {

namespace {

bool inside(const FrameAnnotations::DynamicBox& b, const Vec3& p) {
  if (p.z() < b.z_min || p.z() > b.z_max) return false;
  Vec2 d = p.head<2>() - b.box.center;
  double c = std::cos(b.box.heading), s = std::sin(b.box.heading);
  double lx = c * d.x() + s * d.y(), ly = -s * d.x() + c * d.y();
  return std::abs(lx) <= b.box.half_extents.x() && std::abs(ly) <= b.box.half_extents.y();
}

double mean_nn(const std::vector<Vec3>& from, const KdTree& to) {
  double sum = 0.0;
  for (const auto& p : from) sum += to.nearest(p).squared_distance;
  return sum / double(from.size());
}

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / double(pts.size());
}

// Too few points, or a planar spread without 2-d extent, leaves yaw unobservable.
bool is_degenerate(const std::vector<Vec3>& pts) {
  if (pts.size() < 3) return true;
  Vec2 mean = centroid(pts).head<2>();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) {
    Vec2 d = p.head<2>() - mean;
    cov += d * d.transpose();
  }
  cov /= double(pts.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  return es.eigenvalues()(0) < 1e-8;
}

}  // namespace

PointCloud filter_frame(const PointCloud& cloud, const FrameAnnotations& ann, double ground_margin) {
  PointCloud out;
  out.frame_id = cloud.frame_id;
  const bool has_intensity = cloud.intensity.size() == cloud.points.size();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    if (!ann.crop_region.contains(p) || p.z() < ann.ground_height + ground_margin) continue;
    bool dynamic = false;
    for (const auto& b : ann.dynamic_boxes)
      if (inside(b, p)) {
        dynamic = true;
        break;
      }
    if (dynamic) continue;
    out.points.push_back(p);
    if (has_intensity) out.intensity.push_back(cloud.intensity[i]);
  }
  if (out.points.empty()) throw EmptyResult("frame '" + cloud.frame_id + "': every point was filtered out");
  return out;
}

double chamfer_distance(const PointCloud& p, const PointCloud& q) {
  if (p.empty() || q.empty()) throw EmptyCloud("chamfer distance of an empty cloud");
  KdTree tp(p.points), tq(q.points);
  double a = mean_nn(p.points, tq), b = mean_nn(q.points, tp);
  // Same two terms in either argument order, and a + b == b + a in IEEE arithmetic.
  return a + b;
}

double chamfer_distance_brute(const PointCloud& p, const PointCloud& q) {
  if (p.empty() || q.empty()) throw EmptyCloud("chamfer distance of an empty cloud");
  double a = 0.0, b = 0.0;
  for (const auto& x : p.points) a += nearest_brute(q.points, x).squared_distance;
  for (const auto& y : q.points) b += nearest_brute(p.points, y).squared_distance;
  return a / double(p.size()) + b / double(q.size());
}

RegistrationResult register_frame(const PointCloud& frame, const PointCloud& reference, const geom::Pose& init,
                                  const RegistrationOptions& opt) {
  if (frame.empty() || reference.empty()) throw EmptyCloud("registration needs non-empty clouds");

  const std::vector<Vec3> moved = transform(frame, init).points;
  const KdTree ref_tree(reference.points), frame_tree(moved);
  const Vec3 pivot = centroid(moved);
  const int dims = opt.full_se3 ? 6 : 3;

  // theta = (x, y, yaw) or (x, y, z, roll, pitch, yaw); rotation about the frame centroid.
  using Theta = std::array<double, 6>;
  auto correction = [&](const Theta& th) {
    geom::Pose r = opt.full_se3 ? geom::Pose::from_euler(Vec3::Zero(), th[5], th[4], th[3])
                                : geom::Pose::planar(0.0, 0.0, th[2]);
    Vec3 t = opt.full_se3 ? Vec3(th[0], th[1], th[2]) : Vec3(th[0], th[1], 0.0);
    r.translation = pivot + t - r.rotation * pivot;
    return r;
  };
  std::vector<Vec3> buf(moved.size());
  auto objective = [&](const Theta& th) {
    geom::Pose m = correction(th), inv = m.inverse();
    for (std::size_t i = 0; i < moved.size(); ++i) buf[i] = m.apply(moved[i]);
    double a = mean_nn(buf, ref_tree);
    double b = 0.0;
    for (const auto& r : reference.points) b += frame_tree.nearest(inv.apply(r)).squared_distance;
    return a + b / double(reference.size());
  };

  Theta theta{};
  const bool degenerate = is_degenerate(moved) || is_degenerate(reference.points);
  if (degenerate) {
    // Rotation is unobservable; start from the centroid offset, which is exact for single points.
    Vec3 d = centroid(reference.points) - pivot;
    theta[0] = d.x();
    theta[1] = d.y();
    if (opt.full_se3) theta[2] = d.z();
  }
  Theta step{};
  for (int k = 0; k < dims; ++k) {
    bool angular = opt.full_se3 ? k >= 3 : k == 2;
    step[k] = angular ? opt.initial_angle_step : opt.initial_step;
  }
  const double min_scale = opt.min_step / opt.initial_step;
  double scale = 1.0;

  RegistrationResult res;
  double cur = objective(theta);
  res.trace.push_back(cur);
  bool converged = cur == 0.0;
  while (!converged && res.iterations < opt.max_iters) {
    ++res.iterations;
    const double before = cur;
    bool moved_any = false;
    for (int k = 0; k < dims; ++k) {
      for (double sign : {1.0, -1.0}) {
        Theta cand = theta;
        cand[k] += sign * step[k] * scale;
        double v = objective(cand);
        if (v < cur) {
          theta = cand;
          cur = v;
          moved_any = true;
          break;
        }
      }
    }
    res.trace.push_back(cur);
    if (cur == 0.0) {
      converged = true;
    } else if (moved_any) {
      converged = before - cur < opt.cd_tol && scale <= 0.01;
    } else {
      scale *= 0.5;
      converged = scale < min_scale;
    }
  }

  res.corrected = correction(theta) * init;
  res.final_cd = cur;
  if (degenerate)
    res.status = RegistrationStatus::degenerate;
  else if (!converged && cur > opt.accept_cd)
    res.status = RegistrationStatus::non_convergence;
  else
    res.status = RegistrationStatus::converged;
  return res;
}

SequenceCorrection correct_sequence(const std::vector<PointCloud>& frames,
                                    const std::vector<FrameAnnotations>& annotations,
                                    std::optional<std::size_t> reference_index, const RegistrationOptions& opt) {
  SequenceCorrection out;
  const std::size_t n = frames.size();
  if (n == 0) return out;
  if (!annotations.empty() && annotations.size() != n)
    throw ValidationError("annotation count " + std::to_string(annotations.size()) + " differs from frame count " +
                          std::to_string(n));
  const std::size_t ref = reference_index.value_or(n / 2);
  if (ref >= n) throw ValidationError("reference index " + std::to_string(ref) + " out of range");
  out.reference_index = ref;
  out.corrections.assign(n, geom::Pose::identity());
  out.details.resize(n);

  auto prepare = [&](std::size_t i) {
    return annotations.empty() ? frames[i] : filter_frame(frames[i], annotations[i], opt.ground_margin);
  };
  PointCloud reference;
  try {
    reference = prepare(ref);
    reference.validate();
  } catch (const Error& e) {
    throw RegistrationError(ref, e.what());
  }

  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i) {
    if (std::size_t(i) == ref) continue;
    try {
      PointCloud f = prepare(i);
      f.validate();
      out.details[i] = register_frame(f, reference, geom::Pose::identity(), opt);
      out.corrections[i] = out.details[i].corrected;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw RegistrationError(i, e.what());
    }
  }
  return out;
}

}  // namespace drivesim::reg
