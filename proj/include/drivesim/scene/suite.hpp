#pragma once

#include <filesystem>
#include <vector>

#include "drivesim/scene/scenario.hpp"

namespace drivesim::scene {

/// Small rig used by the shipped scenarios: one 64x48 front camera, the
/// default LiDAR and BEV grid.
sensors::SensorRig suite_rig();

/// Fourteen replay-ego scenarios whose recordings are kinematic rollouts of
/// smooth control sequences, with replayed traffic.
std::vector<Scenario> non_reactive_suite();

/// Ego at 10 m/s with a stationary vehicle 40 m ahead on a straight road.
Scenario stationary_blocker_scenario();

/// Two agents crossing at a four-way intersection, the second arriving later.
/// `mirrored` reflects the whole scene through the x axis.
Scenario crossing_scenario(bool mirrored);

/// Writes <dir>/<name>.ini plus its recordings and meshes under <dir>/assets,
/// filling in the asset paths.
void write_scenario(const std::filesystem::path& dir, Scenario sc);

}  // namespace drivesim::scene
