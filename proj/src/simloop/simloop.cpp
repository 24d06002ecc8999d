#include "drivesim/simloop/simloop.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "drivesim/common/error.hpp"
#include "drivesim/common/rng.hpp"
#include "drivesim/scene/compose.hpp"

namespace drivesim::simloop {

namespace {

ParticipantRecord record_of(const scene::ParticipantState& ps) {
  return {ps.pose.translation.x(), ps.pose.translation.y(), ps.pose.yaw(), ps.v};
}

int index_of(const scene::WorldSnapshot& snap, const std::string& id) {
  for (int i = 0; i < int(snap.participants.size()); ++i)
    if (snap.participants[i].participant->id == id) return i;
  throw ValidationError("participant '" + id + "' not in snapshot");
}

agents::Observation observe(const sensors::SensorFrame& f, const control::EgoState& s, scene::Command cmd,
                            std::uint32_t step, const sensors::SensorRig& rig) {
  agents::Observation o;
  o.step = step;
  o.ego = {s.t, s.x, s.y, s.heading, s.v, s.a, cmd};
  o.bev_cells = std::uint32_t(f.bev.cells);
  o.bev_extent = f.bev.extent;
  o.bev = f.bev.counts;
  if (rig.include_images)
    for (const auto& c : f.cameras) o.images.push_back(agents::to_wire(c.rgb.data, c.rgb.width, c.rgb.height));
  if (rig.include_points)
    for (const auto& p : f.points) o.points.push_back({float(p.x()), float(p.y()), float(p.z())});
  return o;
}

// Agent entries come straight from the controller state, not the posed mesh.
std::vector<ParticipantRecord> records(const scene::WorldSnapshot& snap,
                                       const std::map<std::string, control::EgoState>& states) {
  std::vector<ParticipantRecord> out;
  for (const auto& ps : snap.participants) {
    if (ps.participant->is_agent()) {
      const auto& s = states.at(ps.participant->agent_id());
      out.push_back({s.x, s.y, s.heading, s.v});
    } else {
      out.push_back(record_of(ps));
    }
  }
  return out;
}

}  // namespace

LogHeader make_header(const scene::Scenario& sc, const std::map<std::string, std::string>& bindings) {
  LogHeader h;
  h.scenario = sc.name;
  h.mode = sc.mode;
  h.seed = sc.sim.seed;
  h.t0 = 0.0;
  h.dt = sc.sim.dt;
  h.steps = sc.sim.steps;
  const auto all = sc.all_participants();
  for (const auto* p : all) h.participants.push_back({p->id, p->half_extents});
  for (int i = 0; i < int(all.size()); ++i) {
    const auto* p = all[i];
    if (!p->is_agent()) continue;
    AgentInfo a;
    a.id = p->agent_id();
    a.participant = i;
    a.command = std::get<scene::AgentMode>(p->mode).command;
    a.route = sc.route_of(*p);
    a.reference_progress = sc.reference_progress(*p);
    auto b = bindings.find(a.id);
    a.binding = b == bindings.end() ? "" : b->second;
    h.agents.push_back(std::move(a));
  }
  h.drivable = sc.background.drivable;
  h.scoring = sc.scoring;
  return h;
}

void validate_plan(const scene::Trajectory& plan, double t, const std::string& agent_id) {
  auto fail = [&](const std::string& what) { throw ProtocolError("plan from '" + agent_id + "': " + what); };
  if (plan.samples.size() < 2) fail("needs at least 2 waypoints");
  for (std::size_t i = 0; i < plan.samples.size(); ++i) {
    const auto& s = plan.samples[i];
    if (!std::isfinite(s.t) || !std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.heading) ||
        !std::isfinite(s.v))
      fail("non-finite waypoint");
    if (i > 0 && !(s.t > plan.samples[i - 1].t)) fail("waypoint times must increase strictly");
  }
  if (plan.samples.front().t < t - 1e-9) fail("first waypoint lies in the past");
}

std::vector<std::string> world_events(const scene::Scenario& sc, const scene::WorldSnapshot& snap) {
  std::vector<std::string> ev;
  const auto& ps = snap.participants;
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t j = i + 1; j < ps.size(); ++j)
      if (geom::boxes_overlap(ps[i].footprint, ps[j].footprint))
        ev.push_back("collision " + ps[i].participant->id + " " + ps[j].participant->id);
  for (const auto& p : ps) {
    if (!p.participant->is_agent()) continue;
    const bool inside = std::any_of(sc.background.drivable.begin(), sc.background.drivable.end(),
                                    [&](const geom::Polygon2D& poly) { return geom::footprint_in_polygon(p.footprint, poly); });
    if (!inside) ev.push_back("offroad " + p.participant->id);
  }
  return ev;
}

SimLog run(const scene::Scenario& sc, std::map<std::string, std::unique_ptr<agents::AgentHandle>>& handles,
           const RunOptions& opt, const sensors::StaticWorld* world_in) {
  sc.validate();
  const auto agents_list = sc.agents();
  for (const auto* p : agents_list)
    if (!handles.count(p->agent_id())) throw ValidationError("no binding for agent '" + p->agent_id() + "'");

  std::optional<sensors::StaticWorld> own;
  if (!world_in) own = sensors::build_static_world(sc);
  const sensors::StaticWorld& world = world_in ? *world_in : *own;

  const double dt = sc.sim.dt;
  SimLog log;
  log.header = make_header(sc, opt.bindings);

  std::map<std::string, control::EgoState> states;
  for (const auto* p : agents_list) {
    control::EgoState s;
    s.t = 0.0;
    s.x = p->x;
    s.y = p->y;
    s.heading = p->heading;
    s.v = p->initial_speed;
    states[p->agent_id()] = s;
  }

  auto finish_all = [&](const std::string& reason) {
    for (auto& [id, h] : handles) h->finish(reason);
  };

  try {
    for (const auto* p : agents_list) {
      agents::Welcome w;
      w.agent_id = p->agent_id();
      w.dt = dt;
      w.plan_steps = std::uint32_t(sc.sim.plan_steps);
      w.total_steps = std::uint32_t(sc.sim.steps);
      w.command = std::get<scene::AgentMode>(p->mode).command;
      for (const auto& q : sc.route_of(*p).points) w.route.push_back({q.x(), q.y()});
      w.params = p->agent_params;
      handles.at(w.agent_id)->start(w);
    }

    scene::TriggerTimes triggers;
    const bool cameras = sc.sensors.include_images || opt.dump_dir.has_value();
    for (int k = 0; k < sc.sim.steps; ++k) {
      const double t = k * dt;
      const auto snap = scene::compose(sc, t, states, triggers);
      scene::update_triggers(snap, triggers);

      StepRecord rec;
      rec.k = k;
      rec.t = t;
      rec.states = records(snap, states);
      rec.events = world_events(sc, snap);

      // Everything every agent perceives at t_k is fixed before any plan is read.
      const sensors::DynamicWorld dyn(snap);
      std::vector<agents::Observation> obs;
      std::vector<std::string> digests;
      for (std::size_t i = 0; i < agents_list.size(); ++i) {
        const auto* p = agents_list[i];
        const int idx = index_of(snap, p->id);
        sensors::RenderOptions ro;
        ro.seed = sc.sim.seed;
        ro.stream = mix64(std::uint64_t(k) * 1024 + i);
        ro.shade_samples = sc.sensors.shade_samples;
        ro.shadow_samples = sc.sensors.shadow_samples;
        ro.exec = opt.exec;
        const auto frame = sensors::render_frame(world, dyn, idx, sc.sensors, ro, cameras);
        digests.push_back(frame.digest());
        if (opt.dump_dir) {
          const auto dir = *opt.dump_dir / fmt::format("step_{:03d}", k);
          std::filesystem::create_directories(dir);
          sensors::dump_frame(frame, (dir / (p->agent_id() + "_")).string());
        }
        obs.push_back(observe(frame, states.at(p->agent_id()), std::get<scene::AgentMode>(p->mode).command,
                              std::uint32_t(k), sc.sensors));
      }
      std::vector<agents::Plan> plans;
      std::size_t current = 0;
      try {
        for (current = 0; current < agents_list.size(); ++current)
          handles.at(agents_list[current]->agent_id())->post(obs[current]);
        for (current = 0; current < agents_list.size(); ++current) {
          const auto& id = agents_list[current]->agent_id();
          plans.push_back(handles.at(id)->collect(std::uint32_t(k), sc.sim.agent_timeout));
          validate_plan(plans.back().trajectory, t, id);
        }
      } catch (const AgentDisconnected&) {
        const std::string who = agents_list[current]->agent_id();
        log.termination = "disconnected " + who;
        log.final_t = t;
        log.final_states = rec.states;
        finish_all(log.termination);
        return log;
      }

      for (std::size_t i = 0; i < agents_list.size(); ++i) {
        const auto& id = agents_list[i]->agent_id();
        const auto res = control::track_step(states.at(id), plans[i].trajectory, sc.sim.vehicle, sc.sim.controller, dt);
        auto next = res.next;
        next.t = (k + 1) * dt;
        states[id] = next;
        rec.agents.push_back({id, std::move(plans[i].trajectory), res.controls, digests[i]});
      }
      log.steps.push_back(std::move(rec));
    }
    const double t_end = sc.sim.steps * dt;
    const auto snap = scene::compose(sc, t_end, states, triggers);
    log.final_t = t_end;
    log.final_states = records(snap, states);
    finish_all("completed");
  } catch (...) {
    finish_all("aborted");
    throw;
  }
  return log;
}

SimLog open_loop_log(const scene::Scenario& sc) {
  sc.validate();
  const auto agents_list = sc.agents();
  for (const auto* p : agents_list)
    if (!p->trajectory) throw ValidationError("open-loop scoring needs a recording for agent '" + p->agent_id() + "'");
  SimLog log;
  log.header = make_header(sc, {});
  log.header.origin = "open_loop";
  const double dt = sc.sim.dt;
  auto states_at = [&](double t) {
    std::map<std::string, control::EgoState> st;
    for (const auto* p : agents_list) {
      const auto s = scene::sample(*p->trajectory, t);
      st[p->agent_id()] = control::EgoState{t, s.x, s.y, s.heading, s.v, 0.0, 0.0};
    }
    return st;
  };
  scene::TriggerTimes triggers;
  for (int k = 0; k <= sc.sim.steps; ++k) {
    const double t = k * dt;
    const auto st = states_at(t);
    const auto snap = scene::compose(sc, t, st, triggers);
    scene::update_triggers(snap, triggers);
    auto recs = records(snap, st);
    if (k == sc.sim.steps) {
      log.final_t = t;
      log.final_states = std::move(recs);
      break;
    }
    StepRecord rec;
    rec.k = k;
    rec.t = t;
    rec.states = std::move(recs);
    rec.events = world_events(sc, snap);
    for (const auto* p : agents_list)
      rec.agents.push_back({p->agent_id(), agents::replay_plan(*p->trajectory, t, dt, sc.sim.plan_steps), {}, ""});
    log.steps.push_back(std::move(rec));
  }
  return log;
}

}  // namespace drivesim::simloop
