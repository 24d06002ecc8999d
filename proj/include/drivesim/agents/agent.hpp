#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include "drivesim/agents/protocol.hpp"
#include "drivesim/agents/transport.hpp"
#include "drivesim/geom/polygon.hpp"

namespace drivesim::agents {

/// Planning logic, independent of where it runs.
class Planner {
 public:
  virtual ~Planner() = default;
  virtual void begin(const Welcome&) {}
  virtual scene::Trajectory plan(const Observation& obs) = 0;
};

/// The simulation loop's view of one agent. Lockstep: the loop posts every
/// agent's observation before collecting any plan.
class AgentHandle {
 public:
  virtual ~AgentHandle() = default;
  virtual void start(const Welcome& session) = 0;
  virtual void post(const Observation& obs) = 0;
  /// Throws AgentTimeout, AgentDisconnected or ProtocolError.
  virtual Plan collect(std::uint32_t step, double timeout_s) = 0;
  virtual void finish(const std::string& /*reason*/) {}
};

class InProcessAgent : public AgentHandle {
 public:
  explicit InProcessAgent(std::unique_ptr<Planner> planner) : planner_(std::move(planner)) {}
  void start(const Welcome& session) override { planner_->begin(session); }
  void post(const Observation& obs) override { pending_ = obs; }
  Plan collect(std::uint32_t step, double timeout_s) override;

 private:
  std::unique_ptr<Planner> planner_;
  std::optional<Observation> pending_;
};

class RemoteAgent : public AgentHandle {
 public:
  RemoteAgent(std::string id, Connection conn) : id_(std::move(id)), conn_(std::move(conn)) {}
  void start(const Welcome& session) override { conn_.send(session); }
  void post(const Observation& obs) override { conn_.send(obs); }
  Plan collect(std::uint32_t step, double timeout_s) override;
  void finish(const std::string& reason) override;

 private:
  std::string id_;
  Connection conn_;
};

/// Accepts one connection per expected agent id on a shared endpoint.
/// Version mismatches, unknown and duplicate ids get an error reply and are
/// disconnected; the others keep waiting. Throws AgentTimeout(id, -1) for the
/// first id still missing at the deadline.
std::map<std::string, std::unique_ptr<AgentHandle>> accept_agents(Listener& listener,
                                                                   const std::set<std::string>& ids,
                                                                   double timeout_s);

/// The client half: handshake, then observation/plan turns.
class AgentClient {
 public:
  /// Throws VersionMismatch, DuplicateAgentId or ProtocolError when refused.
  static AgentClient connect(const Endpoint& ep, const std::string& agent_id, double timeout_s,
                             std::uint8_t version = kProtocolVersion);
  const Welcome& session() const { return session_; }
  /// nullopt once the harness says bye.
  std::optional<Observation> next_observation(double timeout_s);
  void send_plan(const Plan& plan) { conn_.send(plan); }

 private:
  AgentClient(Connection c, Welcome w) : conn_(std::move(c)), session_(std::move(w)) {}
  Connection conn_;
  Welcome session_;
};

/// Runs `planner` as a remote agent until the harness ends the session.
/// Returns the number of plans sent.
int serve_planner(const Endpoint& ep, const std::string& agent_id, Planner& planner, double timeout_s);

// Built-in planners.

/// Waypoints k = 1..M at t + k dt along the current heading at the current speed.
scene::Trajectory constant_velocity_plan(const EgoStatus& ego, double dt, int steps);

/// The recording sampled at t + k dt, k = 1..M, clamped past its end.
scene::Trajectory replay_plan(const scene::Trajectory& recording, double t, double dt, int steps);

struct RuleParams {
  double cruise = -1.0;  // m/s; negative: keep the initial speed
  double a_brake = 4.0;
  double a_accel = 1.0;
  double jerk = 6.0;  // ramp limit on planned acceleration
  double margin = 3.0;  // m kept to the obstacle
  double corridor_half_width = 1.4;
  double front_offset = 2.25;  // ego centre to front bumper
  double min_count = 1.0;      // upper-bin points that make a cell occupied
  static RuleParams from(const std::map<std::string, double>& params);
};

/// Free distance along the route from the front bumper to the nearest
/// occupied BEV cell inside the corridor; infinity if none.
double corridor_gap(const Observation& obs, const geom::Polyline& route, const RuleParams& p);

/// Braking corridor length at speed v: v^2/(2 a_brake) + the distance lost to
/// the jerk ramp + margin.
double corridor_length(double v, const RuleParams& p);

class RulePlanner : public Planner {
 public:
  void begin(const Welcome& w) override;
  scene::Trajectory plan(const Observation& obs) override;
  bool braking() const { return braking_; }

 private:
  Welcome session_;
  geom::Polyline route_;
  RuleParams params_;
  double cruise_ = 0.0;
  bool braking_ = false;
};

class ConstantVelocityPlanner : public Planner {
 public:
  void begin(const Welcome& w) override { session_ = w; }
  scene::Trajectory plan(const Observation& obs) override {
    return constant_velocity_plan(obs.ego, session_.dt, int(session_.plan_steps));
  }

 private:
  Welcome session_;
};

class ReplayPlanner : public Planner {
 public:
  explicit ReplayPlanner(scene::Trajectory recording) : recording_(std::move(recording)) {}
  void begin(const Welcome& w) override { session_ = w; }
  scene::Trajectory plan(const Observation& obs) override {
    return replay_plan(recording_, obs.ego.t, session_.dt, int(session_.plan_steps));
  }

 private:
  scene::Trajectory recording_;
  Welcome session_;
};

/// "constant_velocity", "replay" or "rule". Replay needs the participant's
/// recording. Throws ValidationError for unknown names.
std::unique_ptr<Planner> make_builtin(const std::string& name, const scene::Participant& participant);
bool is_builtin(const std::string& name);

}  // namespace drivesim::agents
