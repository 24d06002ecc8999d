#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "drivesim/control/control.hpp"
#include "drivesim/geom/polygon.hpp"
#include "drivesim/scene/scenario.hpp"
#include "drivesim/score/config.hpp"

namespace drivesim::simloop {

/// What the scorer needs to know about one agent.
struct AgentInfo {
  std::string id;
  int participant = 0;  // index into LogHeader::participants
  scene::Command command = scene::Command::unknown;
  geom::Polyline route;
  double reference_progress = 0.0;  // m over the whole horizon
  std::string binding;              // builtin name or endpoint
  bool operator==(const AgentInfo&) const = default;
};

struct ParticipantInfo {
  std::string id;
  Vec2 half_extents = Vec2::Zero();
  bool operator==(const ParticipantInfo&) const = default;
};

struct LogHeader {
  std::string scenario;
  scene::SimMode mode = scene::SimMode::non_reactive;
  std::string origin = "closed_loop";  // or open_loop
  std::uint64_t seed = 0;
  double t0 = 0.0;
  double dt = 0.1;
  int steps = 0;
  std::vector<ParticipantInfo> participants;  // ego first
  std::vector<AgentInfo> agents;
  std::vector<geom::Polygon2D> drivable;
  score::ScoreConfig scoring;
  bool operator==(const LogHeader&) const = default;
};

struct ParticipantRecord {
  double x = 0.0, y = 0.0, heading = 0.0, v = 0.0;
  bool operator==(const ParticipantRecord&) const = default;
};

struct AgentStepRecord {
  std::string id;
  scene::Trajectory plan;
  control::Controls controls;
  std::string frame_digest;
  bool operator==(const AgentStepRecord&) const = default;
};

/// World at t_k, then what every agent planned and applied over [t_k, t_k+1).
struct StepRecord {
  int k = 0;
  double t = 0.0;
  std::vector<ParticipantRecord> states;  // aligned with LogHeader::participants
  std::vector<AgentStepRecord> agents;    // aligned with LogHeader::agents
  std::vector<std::string> events;        // "collision a b", "offroad a"
  bool operator==(const StepRecord&) const = default;
};

struct SimLog {
  LogHeader header;
  std::vector<StepRecord> steps;
  double final_t = 0.0;
  std::vector<ParticipantRecord> final_states;  // after the last cycle
  std::string termination = "completed";        // or "disconnected <agent>"
  bool operator==(const SimLog&) const = default;

  geom::OrientedBox2D footprint(int participant, const ParticipantRecord& r) const;
  /// States of one participant at t_0 .. t_n, final state included.
  std::vector<ParticipantRecord> track(int participant) const;
};

/// One JSON record per line: header, steps, end.
std::string serialize_log(const SimLog& log);
SimLog parse_log(const std::string& text);
void write_log(const std::filesystem::path& path, const SimLog& log);
/// Throws LogFormatError naming the 0-based record (line) index.
SimLog read_log(const std::filesystem::path& path);

}  // namespace drivesim::simloop
