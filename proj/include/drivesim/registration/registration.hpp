#pragma once

#include <optional>
#include <vector>

#include "drivesim/registration/point_cloud.hpp"

namespace drivesim::reg {

struct RegistrationOptions {
  double ground_margin = 0.3;     // m above ground_height removed by filter_frame
  double cd_tol = 1e-6;           // m^2, stop when a sweep improves less than this
  int max_iters = 200;            // coordinate-descent sweeps
  double accept_cd = 0.05;        // m^2, above this a max_iters stop is NonConvergence
  double initial_step = 0.5;      // m
  double initial_angle_step = deg2rad(1.0);
  double min_step = 1e-4;         // m; angular steps shrink in proportion
  bool full_se3 = false;          // (x, y, z, roll, pitch, yaw) instead of (x, y, yaw)
};

enum class RegistrationStatus { converged, non_convergence, degenerate };

struct RegistrationResult {
  geom::Pose corrected;
  double final_cd = 0.0;
  int iterations = 0;
  RegistrationStatus status = RegistrationStatus::converged;
  std::vector<double> trace;  // objective after every sweep, starting with the initial value
};

/// Drops points inside dynamic boxes, near or below the ground, and outside
/// the crop region. Throws EmptyResult if nothing survives.
PointCloud filter_frame(const PointCloud& cloud, const FrameAnnotations& ann, double ground_margin = 0.3);

/// Symmetric Chamfer distance in m^2: mean squared NN distance p->q plus q->p.
double chamfer_distance(const PointCloud& p, const PointCloud& q);
/// O(|p||q|) reference.
double chamfer_distance_brute(const PointCloud& p, const PointCloud& q);

/// Finds the correction M minimising CD(M * init * frame, reference);
/// returns corrected = M * init. Deterministic and single-threaded.
RegistrationResult register_frame(const PointCloud& frame, const PointCloud& reference, const geom::Pose& init,
                                  const RegistrationOptions& options = {});

struct SequenceCorrection {
  std::vector<geom::Pose> corrections;
  std::vector<RegistrationResult> details;
  std::size_t reference_index = 0;
};

/// Registers every world-frame cloud against frames[reference_index]
/// (default: the central frame). Frames are filtered with their annotations
/// when given. Per-frame work runs in parallel; errors carry the frame index.
SequenceCorrection correct_sequence(const std::vector<PointCloud>& frames,
                                    const std::vector<FrameAnnotations>& annotations,
                                    std::optional<std::size_t> reference_index = std::nullopt,
                                    const RegistrationOptions& options = {});

}  // namespace drivesim::reg
