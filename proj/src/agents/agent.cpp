#include "drivesim/agents/agent.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "drivesim/common/error.hpp"

namespace drivesim::agents {

namespace {

double now_s() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void try_send(Connection& c, const Message& m) {
  try {
    c.send(m);
  } catch (const std::exception&) {
    // The peer may already be gone; closing is all that is left to do.
  }
}

}  // namespace

Plan InProcessAgent::collect(std::uint32_t step, double) {
  if (!pending_ || pending_->step != step) throw ProtocolError("no observation posted for step " + std::to_string(step));
  Plan p{step, planner_->plan(*pending_)};
  pending_.reset();
  return p;
}

Plan RemoteAgent::collect(std::uint32_t step, double timeout_s) {
  try {
    auto m = conn_.receive(timeout_s);
    if (!m) throw AgentTimeout(id_, int(step));
    if (auto* p = std::get_if<Plan>(&*m)) {
      if (p->step != step)
        throw ProtocolError("plan for step " + std::to_string(p->step) + " while waiting for " + std::to_string(step));
      return std::move(*p);
    }
    if (auto* e = std::get_if<ErrorMessage>(&*m)) throw ProtocolError("agent '" + id_ + "' reported: " + e->text);
    throw ProtocolError("expected a plan from '" + id_ + "'");
  } catch (const AgentTimeout&) {
    try_send(conn_, ErrorMessage{ErrorCode::timeout, "no plan within the timeout"});
    conn_.close();
    throw;
  } catch (const ProtocolError& e) {
    try_send(conn_, ErrorMessage{ErrorCode::malformed, e.what()});
    conn_.close();
    throw;
  }
}

void RemoteAgent::finish(const std::string& reason) {
  if (!conn_.open()) return;
  try_send(conn_, Bye{reason});
  conn_.close();
}

std::map<std::string, std::unique_ptr<AgentHandle>> accept_agents(Listener& listener,
                                                                   const std::set<std::string>& ids,
                                                                   double timeout_s) {
  std::map<std::string, std::unique_ptr<AgentHandle>> out;
  const double deadline = now_s() + timeout_s;
  while (out.size() < ids.size()) {
    const double left = deadline - now_s();
    auto conn = left > 0 ? listener.accept(left) : std::nullopt;
    if (!conn) {
      for (const auto& id : ids)
        if (!out.count(id)) throw AgentTimeout(id, -1);
    }
    try {
      auto m = conn->receive(std::max(0.05, std::min(deadline - now_s(), 5.0)));
      const auto* hello = m ? std::get_if<Hello>(&*m) : nullptr;
      if (!hello) {
        try_send(*conn, ErrorMessage{ErrorCode::malformed, "expected hello"});
        continue;
      }
      if (!ids.count(hello->agent_id)) {
        try_send(*conn, ErrorMessage{ErrorCode::unknown_agent, "no agent '" + hello->agent_id + "' in this run"});
        continue;
      }
      if (out.count(hello->agent_id)) {
        try_send(*conn, ErrorMessage{ErrorCode::duplicate_agent, "agent '" + hello->agent_id + "' already connected"});
        continue;
      }
      out.emplace(hello->agent_id, std::make_unique<RemoteAgent>(hello->agent_id, std::move(*conn)));
    } catch (const VersionMismatch& e) {
      try_send(*conn, ErrorMessage{ErrorCode::version_mismatch, e.what()});
    } catch (const ProtocolError& e) {
      try_send(*conn, ErrorMessage{ErrorCode::malformed, e.what()});
    } catch (const AgentDisconnected&) {
    }
  }
  return out;
}

AgentClient AgentClient::connect(const Endpoint& ep, const std::string& agent_id, double timeout_s,
                                 std::uint8_t version) {
  Connection c = agents::connect(ep, timeout_s);
  c.send(Hello{agent_id}, version);
  auto m = c.receive(timeout_s);
  if (!m) throw ProtocolError("no welcome from " + ep.str());
  if (auto* w = std::get_if<Welcome>(&*m)) {
    if (w->agent_id != agent_id) throw ProtocolError("welcome for a different agent");
    Welcome session = std::move(*w);
    return AgentClient(std::move(c), std::move(session));
  }
  if (auto* e = std::get_if<ErrorMessage>(&*m)) {
    if (e->code == ErrorCode::version_mismatch) throw VersionMismatch(e->text);
    if (e->code == ErrorCode::duplicate_agent) throw DuplicateAgentId(e->text);
    throw ProtocolError(e->text);
  }
  throw ProtocolError("expected welcome");
}

std::optional<Observation> AgentClient::next_observation(double timeout_s) {
  auto m = conn_.receive(timeout_s);
  if (!m) throw AgentTimeout(session_.agent_id, -1);
  if (auto* o = std::get_if<Observation>(&*m)) return std::move(*o);
  if (std::holds_alternative<Bye>(*m)) return std::nullopt;
  if (auto* e = std::get_if<ErrorMessage>(&*m)) throw ProtocolError(e->text);
  throw ProtocolError("expected an observation");
}

int serve_planner(const Endpoint& ep, const std::string& agent_id, Planner& planner, double timeout_s) {
  auto client = AgentClient::connect(ep, agent_id, timeout_s);
  planner.begin(client.session());
  int plans = 0;
  while (auto obs = client.next_observation(timeout_s)) {
    client.send_plan(Plan{obs->step, planner.plan(*obs)});
    ++plans;
  }
  return plans;
}

scene::Trajectory constant_velocity_plan(const EgoStatus& ego, double dt, int steps) {
  scene::Trajectory tr;
  const double c = std::cos(ego.heading), s = std::sin(ego.heading);
  for (int k = 1; k <= steps; ++k) {
    const double d = ego.v * (k * dt);
    tr.samples.push_back({ego.t + k * dt, ego.x + d * c, ego.y + d * s, ego.heading, ego.v});
  }
  return tr;
}

scene::Trajectory replay_plan(const scene::Trajectory& recording, double t, double dt, int steps) {
  scene::Trajectory tr;
  // Anchored at t itself so the tracker reproduces the recording exactly.
  for (int k = 0; k < steps; ++k) {
    auto s = scene::sample(recording, t + k * dt);
    s.t = t + k * dt;
    tr.samples.push_back(s);
  }
  return tr;
}

RuleParams RuleParams::from(const std::map<std::string, double>& params) {
  RuleParams p;
  const std::map<std::string, double*> fields{{"cruise", &p.cruise},
                                              {"a_brake", &p.a_brake},
                                              {"a_accel", &p.a_accel},
                                              {"jerk", &p.jerk},
                                              {"margin", &p.margin},
                                              {"corridor_half_width", &p.corridor_half_width},
                                              {"front_offset", &p.front_offset},
                                              {"min_count", &p.min_count}};
  for (const auto& [k, v] : params) {
    auto it = fields.find(k);
    if (it == fields.end()) throw ValidationError("unknown rule agent parameter '" + k + "'");
    *it->second = v;
  }
  if (!(p.a_brake > 0) || !(p.a_accel > 0) || !(p.jerk > 0) || p.margin < 0 || !(p.corridor_half_width > 0))
    throw ValidationError("rule agent parameters out of range");
  return p;
}

double corridor_length(double v, const RuleParams& p) {
  // Ramping from zero to -a_brake at the jerk limit costs about v a_brake / (2 jerk) extra metres.
  return v * v / (2.0 * p.a_brake) + v * p.a_brake / (2.0 * p.jerk) + p.margin;
}

double corridor_gap(const Observation& obs, const geom::Polyline& route, const RuleParams& p) {
  const int n = int(obs.bev_cells);
  if (n == 0) return std::numeric_limits<double>::infinity();
  const double cs = 2.0 * obs.bev_extent / n;
  const double c = std::cos(obs.ego.heading), s = std::sin(obs.ego.heading);
  const double s_ego = route.project(Vec2(obs.ego.x, obs.ego.y));
  double best = std::numeric_limits<double>::infinity();
  for (int ix = 0; ix < n; ++ix) {
    const double lx = -obs.bev_extent + (ix + 0.5) * cs;
    for (int iy = 0; iy < n; ++iy) {
      if (obs.bev_at(ix, iy, 1) < p.min_count) continue;
      const double ly = -obs.bev_extent + (iy + 0.5) * cs;
      const Vec2 w(obs.ego.x + c * lx - s * ly, obs.ego.y + s * lx + c * ly);
      const double sc = route.project(w);
      if ((w - route.point_at(sc)).norm() > p.corridor_half_width + 0.5 * cs) continue;
      const double gap = sc - s_ego - p.front_offset - 0.5 * cs;
      if (sc > s_ego) best = std::min(best, std::max(0.0, gap));
    }
  }
  return best;
}

void RulePlanner::begin(const Welcome& w) {
  session_ = w;
  if (w.route.size() < 2) throw ValidationError("rule agent needs a route");
  route_.points.clear();
  for (const auto& p : w.route) route_.points.emplace_back(p[0], p[1]);
  params_ = RuleParams::from(w.params);
  cruise_ = params_.cruise;
  braking_ = false;
}

scene::Trajectory RulePlanner::plan(const Observation& obs) {
  if (cruise_ < 0) cruise_ = obs.ego.v;
  const double dt = session_.dt;
  const double v0 = std::max(0.0, obs.ego.v);
  const double gap = corridor_gap(obs, route_, params_);
  if (gap <= corridor_length(v0, params_))
    braking_ = true;
  else if (gap > corridor_length(std::max(v0, 1.0), params_) + params_.margin)
    braking_ = false;

  // Anchored at the current time so the tracker's first interval carries the
  // first jerk-limited change rather than the second.
  scene::Trajectory tr;
  double s = route_.project(Vec2(obs.ego.x, obs.ego.y));
  double v = v0, a = obs.ego.a;
  const Vec2 p0 = route_.point_at(s);
  tr.samples.push_back({obs.ego.t, p0.x(), p0.y(), route_.heading_at(s), v});
  for (int k = 1; k < int(session_.plan_steps); ++k) {
    const double target = braking_ ? -params_.a_brake : std::clamp((cruise_ - v) / 2.0, -1.0, params_.a_accel);
    a = std::clamp(target, a - params_.jerk * dt, a + params_.jerk * dt);
    double vn = v + a * dt;
    double ds;
    if (vn <= 0.0) {
      ds = a < 0 ? v * v / (-2.0 * a) : 0.0;
      vn = 0.0;
      a = 0.0;
    } else {
      ds = 0.5 * (v + vn) * dt;
    }
    s += ds;
    v = vn;
    const Vec2 p = route_.point_at(s);
    tr.samples.push_back({obs.ego.t + k * dt, p.x(), p.y(), route_.heading_at(s), v});
  }
  return tr;
}

bool is_builtin(const std::string& name) {
  return name == "constant_velocity" || name == "replay" || name == "rule";
}

std::unique_ptr<Planner> make_builtin(const std::string& name, const scene::Participant& participant) {
  if (name == "constant_velocity") return std::make_unique<ConstantVelocityPlanner>();
  if (name == "rule") return std::make_unique<RulePlanner>();
  if (name == "replay") {
    if (!participant.trajectory)
      throw ValidationError("replay agent for '" + participant.id + "' needs a recorded trajectory");
    return std::make_unique<ReplayPlanner>(*participant.trajectory);
  }
  throw ValidationError("unknown built-in agent '" + name + "'");
}

}  // namespace drivesim::agents
