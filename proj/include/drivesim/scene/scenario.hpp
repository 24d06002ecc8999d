#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "drivesim/control/control.hpp"
#include "drivesim/geom/mesh.hpp"
#include "drivesim/geom/polygon.hpp"
#include "drivesim/registration/point_cloud.hpp"
#include "drivesim/relight/relight.hpp"
#include "drivesim/scene/trajectory.hpp"
#include "drivesim/score/config.hpp"
#include "drivesim/sensors/rig.hpp"

namespace drivesim::scene {

enum class SimMode { non_reactive, safety_test, multi_agent };
enum class Command { left, right, straight, unknown };
enum class BehaviorKind { stationary, sudden_brake, intersection_cross, cut_in };

const char* to_string(SimMode m);
const char* to_string(Command c);
const char* to_string(BehaviorKind k);
SimMode parse_mode(const std::string& s);
Command parse_command(const std::string& s);
BehaviorKind parse_behavior(const std::string& s);  // throws UnknownBehavior

struct BehaviorParams {
  BehaviorKind kind = BehaviorKind::stationary;
  double trigger_distance = 0.0;  // m to the nearest agent vehicle; 0 disables
  double trigger_time = 0.0;      // s; fallback when the distance never triggers
  double a_brake = 4.0;           // m/s^2, sudden_brake
  double lane_width = 3.5;        // m, cut_in
  double cut_duration = 2.0;      // s, cut_in
  double cut_direction = 1.0;     // +1 towards the participant's left, -1 right
  bool operator==(const BehaviorParams&) const = default;
};

struct ReplayMode {
  bool operator==(const ReplayMode&) const = default;
};
struct ScriptedMode {
  BehaviorParams behavior;
  bool operator==(const ScriptedMode&) const = default;
};
struct AgentMode {
  std::string agent_id;
  Command command = Command::unknown;
  bool operator==(const AgentMode&) const = default;
};
using ParticipantMode = std::variant<ReplayMode, ScriptedMode, AgentMode>;

struct Participant {
  std::string id;
  ParticipantMode mode;
  std::shared_ptr<const geom::TriangleMesh> mesh;
  std::string mesh_path;  // as written in the config; empty for the generated vehicle body
  Vec2 half_extents = Vec2(2.25, 0.95);  // footprint half length, half width
  double height = 1.6;
  relight::Material material;
  double x = 0.0, y = 0.0, heading = 0.0;
  double initial_speed = 0.0;
  std::optional<Trajectory> trajectory;  // recording: replay path, EP reference for agents
  std::string trajectory_path;
  std::optional<geom::Polyline> route;  // agent route; defaults to the background centerline
  std::map<std::string, double> agent_params;  // rule.* keys, passed to built-in agents

  bool is_agent() const { return std::holds_alternative<AgentMode>(mode); }
  const std::string& agent_id() const;  // throws if not an agent
  geom::OrientedBox2D footprint_at(const geom::Pose& pose) const;
  geom::Pose initial_pose() const { return geom::Pose::planar(x, y, heading); }
};

struct BackgroundMesh {
  std::string path;
  std::shared_ptr<const geom::TriangleMesh> mesh;
};

struct BackgroundScene {
  std::vector<BackgroundMesh> meshes;  // world coordinates
  double ground_z = 0.0;
  double ground_extent = 200.0;  // half size of the ground quad
  Vec3 ground_albedo = Vec3(0.35, 0.35, 0.37);
  std::vector<geom::Polygon2D> drivable;
  geom::Polyline centerline;
  Vec3 sky = Vec3(0.55, 0.7, 0.9);
  std::string lightmap = "fit";  // "fit" or a PFM path
  std::optional<relight::LightMaps> lightmaps;  // loaded when lightmap is a path
  std::optional<Vec3> sun;
  std::string reference_cloud_path;
  std::optional<reg::PointCloud> reference_cloud;
};

struct SimConfig {
  double dt = 0.1;
  int steps = 40;
  std::uint64_t seed = 0;
  int plan_steps = 8;
  double agent_timeout = 10.0;  // s
  control::VehicleParams vehicle;
  control::ControllerParams controller;
  bool operator==(const SimConfig&) const = default;
};

struct Scenario {
  std::string name;
  SimMode mode = SimMode::non_reactive;
  std::filesystem::path source;  // file the scenario was loaded from
  BackgroundScene background;
  Participant ego;
  std::vector<Participant> participants;
  sensors::SensorRig sensors;
  SimConfig sim;
  score::ScoreConfig scoring;

  /// Ego first, then the other participants in declaration order.
  std::vector<const Participant*> all_participants() const;
  /// Agent-mode participants (ego included) in the same order.
  std::vector<const Participant*> agents() const;
  const Participant* find(const std::string& id) const;
  /// Route an agent should follow: its own, else the background centerline.
  const geom::Polyline& route_of(const Participant& p) const;
  /// Arc length along the route covered by the recording, or
  /// initial_speed * steps * dt if there is none.
  double reference_progress(const Participant& p) const;

  void validate() const;
};

Scenario load_scenario(const std::filesystem::path& path);
/// Canonical INI text; asset paths are written as they were given.
std::string serialize_scenario(const Scenario& scenario);
/// Every *.ini below `dir`, sorted by path.
std::vector<std::filesystem::path> find_scenarios(const std::filesystem::path& dir);

}  // namespace drivesim::scene
