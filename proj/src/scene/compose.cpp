#include "drivesim/scene/compose.hpp"

#include <algorithm>
#include <cmath>

#include "drivesim/common/error.hpp"

namespace drivesim::scene {

const ParticipantState* WorldSnapshot::find(const std::string& id) const {
  for (const auto& p : participants)
    if (p.participant->id == id) return &p;
  return nullptr;
}

BehaviorState scripted_behavior(const BehaviorParams& b, const geom::Pose& initial, double v0, double t,
                                double trigger) {
  const bool triggered = trigger >= 0.0 && t >= trigger;
  const double since = triggered ? t - trigger : 0.0;
  double s = 0.0, lateral = 0.0, dheading = 0.0, v = v0;
  switch (b.kind) {
    case BehaviorKind::stationary:
      v = 0.0;
      break;
    case BehaviorKind::intersection_cross:
      s = v0 * t;
      break;
    case BehaviorKind::sudden_brake: {
      if (!triggered) {
        s = v0 * t;
        break;
      }
      const double stop = v0 / b.a_brake;
      const double tb = std::min(since, stop);
      s = v0 * trigger + v0 * tb - 0.5 * b.a_brake * tb * tb;
      v = since >= stop ? 0.0 : v0 - b.a_brake * since;
      break;
    }
    case BehaviorKind::cut_in: {
      s = v0 * t;
      const double frac = std::clamp(since / b.cut_duration, 0.0, 1.0);
      lateral = b.cut_direction * b.lane_width * frac;
      if (triggered && since < b.cut_duration) {
        const double v_lat = b.cut_direction * b.lane_width / b.cut_duration;
        dheading = std::atan2(v_lat, v0);
        v = std::hypot(v0, v_lat);
      }
      break;
    }
  }
  BehaviorState out;
  out.pose = initial * geom::Pose::planar(s, lateral, dheading);
  out.v = v;
  return out;
}

double effective_trigger(const Participant& p, double t, const TriggerTimes& triggers) {
  if (auto it = triggers.find(p.id); it != triggers.end()) return it->second;
  const auto* sm = std::get_if<ScriptedMode>(&p.mode);
  if (!sm) return -1.0;
  const auto& b = sm->behavior;
  // A pure distance trigger has no time fallback unless trigger_time is set.
  const bool time_fallback = b.trigger_time > 0.0 || b.trigger_distance <= 0.0;
  if (time_fallback && t >= b.trigger_time) return b.trigger_time;
  return -1.0;
}

WorldSnapshot compose(const Scenario& sc, double t, const std::map<std::string, control::EgoState>& agent_states,
                      const TriggerTimes& triggers) {
  WorldSnapshot w;
  w.t = t;
  for (const auto* p : sc.all_participants()) {
    ParticipantState ps;
    ps.participant = p;
    if (auto* a = std::get_if<AgentMode>(&p->mode)) {
      auto it = agent_states.find(a->agent_id);
      if (it == agent_states.end()) throw MissingAgentState("no state for agent '" + a->agent_id + "'");
      ps.pose = geom::Pose::planar(it->second.x, it->second.y, it->second.heading);
      ps.v = it->second.v;
    } else if (auto* s = std::get_if<ScriptedMode>(&p->mode)) {
      auto st = scripted_behavior(s->behavior, p->initial_pose(), p->initial_speed, t, effective_trigger(*p, t, triggers));
      ps.pose = st.pose;
      ps.v = st.v;
    } else {
      auto [pose, v] = sample_pose(*p->trajectory, t);
      ps.pose = pose;
      ps.v = v;
    }
    ps.pose.translation.z() = sc.background.ground_z;
    ps.footprint = p->footprint_at(ps.pose);
    w.participants.push_back(ps);
  }
  return w;
}

void update_triggers(const WorldSnapshot& world, TriggerTimes& triggers) {
  for (const auto& ps : world.participants) {
    const auto* sm = std::get_if<ScriptedMode>(&ps.participant->mode);
    if (!sm || sm->behavior.trigger_distance <= 0.0 || triggers.count(ps.participant->id)) continue;
    if (effective_trigger(*ps.participant, world.t, triggers) >= 0.0) continue;
    for (const auto& other : world.participants) {
      if (!other.participant->is_agent()) continue;
      double d = (other.pose.translation - ps.pose.translation).head<2>().norm();
      if (d <= sm->behavior.trigger_distance) {
        triggers[ps.participant->id] = world.t;
        break;
      }
    }
  }
}

}  // namespace drivesim::scene
