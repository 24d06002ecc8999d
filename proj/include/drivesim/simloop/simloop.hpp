#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "drivesim/agents/agent.hpp"
#include "drivesim/common/exec.hpp"
#include "drivesim/sensors/render.hpp"
#include "drivesim/simloop/log.hpp"

namespace drivesim::simloop {

struct RunOptions {
  std::optional<std::filesystem::path> dump_dir;  // per-step frames when set
  std::map<std::string, std::string> bindings;    // agent id -> builtin or endpoint, for the log header
  Exec exec = Exec::parallel;
};

/// Header fields shared by closed-loop and open-loop logs.
LogHeader make_header(const scene::Scenario& sc, const std::map<std::string, std::string>& bindings);

/// Lockstep closed loop over sc.sim.steps cycles. Every agent-mode
/// participant needs a handle. Throws AgentTimeout or ProtocolError; an agent
/// disconnect ends the run early with the termination reason recorded.
SimLog run(const scene::Scenario& sc, std::map<std::string, std::unique_ptr<agents::AgentHandle>>& handles,
           const RunOptions& opt = {}, const sensors::StaticWorld* world = nullptr);

/// The same horizon with every agent placed on its recording instead of
/// driven by the controller: the open-loop reference for scoring.
SimLog open_loop_log(const scene::Scenario& sc);

/// Rejects plans with fewer than 2 waypoints, non-increasing or non-finite
/// values, or a first waypoint before t. Throws ProtocolError.
void validate_plan(const scene::Trajectory& plan, double t, const std::string& agent_id);

/// Participant ids whose footprints overlap, as "collision a b" events, and
/// agents off the drivable area as "offroad a".
std::vector<std::string> world_events(const scene::Scenario& sc, const scene::WorldSnapshot& snap);

}  // namespace drivesim::simloop
