#pragma once

#include <map>
#include <string>
#include <vector>

#include "drivesim/scene/scenario.hpp"

namespace drivesim::scene {

struct ParticipantState {
  const Participant* participant = nullptr;
  geom::Pose pose;
  double v = 0.0;
  geom::OrientedBox2D footprint;
};

struct WorldSnapshot {
  double t = 0.0;
  std::vector<ParticipantState> participants;  // Scenario::all_participants order

  const ParticipantState* find(const std::string& id) const;
};

/// Participant id -> time its behavior was triggered.
using TriggerTimes = std::map<std::string, double>;

struct BehaviorState {
  geom::Pose pose;
  double v = 0.0;
};

/// Scripted motion relative to the initial pose. `trigger` is the time the
/// hazard starts, or a negative value if it has not been triggered by t.
BehaviorState scripted_behavior(const BehaviorParams& params, const geom::Pose& initial, double initial_speed,
                                double t, double trigger);

/// Trigger time for a scripted participant: the recorded one if present,
/// else its time fallback when t has reached it, else negative.
double effective_trigger(const Participant& p, double t, const TriggerTimes& triggers);

/// Pure: poses every participant at time t. Agent-mode participants come
/// from `agent_states` (keyed by agent id); throws MissingAgentState.
WorldSnapshot compose(const Scenario& scenario, double t, const std::map<std::string, control::EgoState>& agent_states,
                      const TriggerTimes& triggers = {});

/// Distance-triggered behaviors that fire in `world` (not yet in `triggers`).
void update_triggers(const WorldSnapshot& world, TriggerTimes& triggers);

}  // namespace drivesim::scene
