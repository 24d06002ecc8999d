#include "drivesim/scene/suite.hpp"

#include <cmath>
#include <fstream>
#include <functional>

#include "drivesim/common/error.hpp"
#include "drivesim/control/control.hpp"

namespace drivesim::scene {
namespace {

constexpr double kDt = 0.1;
constexpr int kSteps = 40;
constexpr int kPlanSteps = 8;
// Recordings run past the horizon so replay plans never clamp.
constexpr int kRecordSamples = kSteps + kPlanSteps + 4;

using Profile = std::function<control::Controls(int)>;

// Piecewise-linear ramp through (step, value) knots, flat outside.
double ramp(int k, std::initializer_list<std::pair<int, double>> knots) {
  auto it = knots.begin();
  if (k <= it->first) return it->second;
  for (auto prev = it++; it != knots.end(); prev = it++) {
    if (k <= it->first) {
      const double s = double(k - prev->first) / double(it->first - prev->first);
      return prev->second + s * (it->second - prev->second);
    }
  }
  return (knots.end() - 1)->second;
}

Trajectory record(double x, double y, double heading, double v, const Profile& profile) {
  std::vector<control::Controls> u;
  for (int k = 0; k + 1 < kRecordSamples; ++k) u.push_back(profile(k));
  return control::rollout({0.0, x, y, heading, v, 0.0, 0.0}, u, kDt, control::VehicleParams{});
}

Trajectory parked(double x, double y, double heading) {
  return record(x, y, heading, 0.0, [](int) { return control::Controls{}; });
}

geom::Polyline path_of(const Trajectory& tr, double extend) {
  geom::Polyline line;
  const auto& f = tr.samples.front();
  const auto& b = tr.samples.back();
  line.points.push_back(Vec2(f.x - extend * std::cos(f.heading), f.y - extend * std::sin(f.heading)));
  for (const auto& s : tr.samples) {
    const Vec2 p(s.x, s.y);
    if ((p - line.points.back()).norm() > 0.5) line.points.push_back(p);
  }
  line.points.push_back(Vec2(b.x + extend * std::cos(b.heading), b.y + extend * std::sin(b.heading)));
  return line;
}

geom::TriangleMesh box_at(const Vec3& half, double x, double y, double yaw, const Vec3& albedo) {
  auto m = geom::make_box(half, albedo);
  const auto pose = geom::Pose::planar(x, y, yaw);
  for (auto& v : m.vertices) v = pose.apply(v);
  for (auto& n : m.normals) n = pose.rotate(n);
  return m;
}

void append(geom::TriangleMesh& dst, const geom::TriangleMesh& src) {
  const auto base = std::uint32_t(dst.vertices.size());
  dst.vertices.insert(dst.vertices.end(), src.vertices.begin(), src.vertices.end());
  dst.normals.insert(dst.normals.end(), src.normals.begin(), src.normals.end());
  for (auto f : src.faces) dst.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  if (dst.albedo.empty()) dst.albedo = src.albedo;
}

// A row of buildings on both sides of the road, set back from its centre.
geom::TriangleMesh buildings_along(const geom::Polyline& road, double setback, std::uint64_t variant) {
  geom::TriangleMesh m;
  const double len = road.length();
  int i = 0;
  for (double s = 6.0; s < len - 6.0; s += 18.0, ++i) {
    const Vec2 p = road.point_at(s);
    const double h = road.heading_at(s);
    const Vec2 n(-std::sin(h), std::cos(h));
    for (double side : {1.0, -1.0}) {
      const double height = 4.0 + double((variant + i * 7 + (side > 0 ? 3 : 0)) % 5);
      const Vec2 c = p + side * (setback + 4.0) * n;
      append(m, box_at(Vec3(6.0, 4.0, height / 2), c.x(), c.y(), h, Vec3(0.6, 0.55, 0.5)));
    }
  }
  for (auto& v : m.vertices) v.z() = std::max(v.z(), 0.0);
  m.albedo.assign(1, Vec3(0.6, 0.55, 0.5));
  return m;
}

Participant vehicle(const std::string& id, ParticipantMode mode, const Vec3& albedo) {
  Participant p;
  p.id = id;
  p.mode = std::move(mode);
  p.material.albedo = albedo;
  p.mesh = std::make_shared<geom::TriangleMesh>(
      geom::make_vehicle(2 * p.half_extents.x(), 2 * p.half_extents.y(), p.height, albedo));
  return p;
}

void place(Participant& p, const Trajectory& tr) {
  const auto& s = tr.samples.front();
  p.x = s.x;
  p.y = s.y;
  p.heading = s.heading;
  p.initial_speed = s.v;
  p.trajectory = tr;
}

Participant replay_car(const std::string& id, const Trajectory& tr, const Vec3& albedo) {
  auto p = vehicle(id, ReplayMode{}, albedo);
  place(p, tr);
  return p;
}

Scenario base(const std::string& name, SimMode mode) {
  Scenario sc;
  sc.name = name;
  sc.mode = mode;
  sc.sensors = suite_rig();
  sc.sim.dt = kDt;
  sc.sim.steps = kSteps;
  sc.sim.plan_steps = kPlanSteps;
  sc.background.sun = Vec3(0.4, 0.3, 0.866);
  return sc;
}

struct Spec {
  const char* name;
  Command command;
  double v0;
  Profile ego;
  std::function<std::vector<Participant>()> traffic;
};

Scenario non_reactive(const Spec& spec, std::uint64_t variant) {
  auto sc = base(spec.name, SimMode::non_reactive);
  const auto rec = record(0.0, 0.0, 0.0, spec.v0, spec.ego);
  sc.ego = vehicle("ego", AgentMode{"ego", spec.command}, Vec3(0.2, 0.3, 0.7));
  place(sc.ego, rec);
  sc.background.centerline = path_of(rec, 30.0);
  sc.background.drivable = {geom::buffer_polyline(sc.background.centerline, 7.0)};
  sc.background.meshes.push_back({"", std::make_shared<geom::TriangleMesh>(
                                          buildings_along(sc.background.centerline, 10.0, variant))});
  if (spec.traffic) sc.participants = spec.traffic();
  return sc;
}

control::Controls steer(double a, double d) { return {a, d}; }

}  // namespace

sensors::SensorRig suite_rig() {
  sensors::SensorRig rig;
  sensors::CameraModel cam;
  cam.width = 64;
  cam.height = 48;
  cam.fx = cam.fy = 40.0;
  cam.cx = 32.0;
  cam.cy = 24.0;
  cam.mount.position = Vec3(1.5, 0.0, 1.5);
  rig.cameras.push_back(cam);
  rig.shade_samples = 8;
  rig.shadow_samples = 8;
  return rig;
}

std::vector<Scenario> non_reactive_suite() {
  const Vec3 red(0.7, 0.15, 0.1), grey(0.5, 0.5, 0.5), white(0.85, 0.85, 0.8);
  const std::vector<Spec> specs{
      {"straight_cruise", Command::straight, 10.0, [](int) { return steer(0, 0); }, nullptr},
      {"straight_accelerate", Command::straight, 6.0,
       [](int k) { return steer(ramp(k, {{0, 0.0}, {5, 1.5}, {30, 1.5}, {35, 0.0}}), 0); }, nullptr},
      {"straight_decelerate", Command::straight, 12.0,
       [](int k) { return steer(ramp(k, {{0, 0.0}, {4, -2.0}, {30, -2.0}, {34, 0.0}}), 0); }, nullptr},
      {"gentle_left", Command::left, 8.0, [](int k) { return steer(0, ramp(k, {{0, 0.0}, {5, 0.06}})); }, nullptr},
      {"gentle_right", Command::right, 8.0, [](int k) { return steer(0, ramp(k, {{0, 0.0}, {5, -0.06}})); },
       nullptr},
      {"lane_change_left", Command::left, 10.0,
       [](int k) { return steer(0, ramp(k, {{0, 0}, {5, 0}, {9, 0.03}, {13, 0.03}, {21, -0.03}, {25, -0.03}, {29, 0}})); },
       nullptr},
      {"lane_change_right", Command::right, 10.0,
       [](int k) { return steer(0, ramp(k, {{0, 0}, {5, 0}, {9, -0.03}, {13, -0.03}, {21, 0.03}, {25, 0.03}, {29, 0}})); },
       nullptr},
      {"s_curve", Command::straight, 7.0,
       [](int k) { return steer(0, ramp(k, {{0, 0}, {6, 0.07}, {14, 0.07}, {26, -0.07}, {34, -0.07}, {40, 0}})); },
       nullptr},
      {"follow_lead", Command::straight, 5.0, [](int) { return steer(0, 0); },
       [=] {
         return std::vector<Participant>{
             replay_car("lead", record(15.0, 0.0, 0.0, 5.0, [](int) { return steer(0, 0); }), red)};
       }},
      {"oncoming_traffic", Command::straight, 9.0, [](int) { return steer(0, 0); },
       [=] {
         return std::vector<Participant>{
             replay_car("oncoming", record(70.0, 3.5, kPi, 9.0, [](int) { return steer(0, 0); }), white)};
       }},
      {"parked_cars", Command::straight, 8.0, [](int) { return steer(0, 0); },
       [=] {
         return std::vector<Participant>{replay_car("parked_a", parked(14.0, -3.8, 0.0), grey),
                                         replay_car("parked_b", parked(26.0, -3.8, 0.0), red),
                                         replay_car("parked_c", parked(40.0, 3.8, kPi), white)};
       }},
      {"stop_and_go", Command::straight, 8.0,
       [](int k) { return steer(ramp(k, {{0, 0}, {4, -2.5}, {16, -2.5}, {20, 0}, {24, 1.5}, {36, 1.5}, {40, 0}}), 0); },
       nullptr},
      {"curve_accelerate", Command::left, 6.0,
       [](int k) { return steer(ramp(k, {{0, 0}, {5, 1.0}}), ramp(k, {{0, 0}, {8, 0.08}, {20, 0.08}, {30, 0.03}})); },
       nullptr},
      {"overtaken", Command::straight, 8.0, [](int) { return steer(0, 0); },
       [=] {
         return std::vector<Participant>{replay_car(
             "fast", record(-12.0, 3.5, 0.0, 11.0, [](int k) { return steer(ramp(k, {{0, 0}, {5, 0.5}}), 0); }),
             white)};
       }},
  };
  std::vector<Scenario> out;
  for (std::size_t i = 0; i < specs.size(); ++i) out.push_back(non_reactive(specs[i], i));
  return out;
}

Scenario stationary_blocker_scenario() {
  auto sc = base("stationary_blocker", SimMode::safety_test);
  sc.ego = vehicle("ego", AgentMode{"ego", Command::straight}, Vec3(0.2, 0.3, 0.7));
  sc.ego.initial_speed = 10.0;
  sc.background.centerline.points = {Vec2(-40, 0), Vec2(160, 0)};
  sc.background.drivable = {geom::buffer_polyline(sc.background.centerline, 7.0)};
  sc.background.meshes.push_back(
      {"", std::make_shared<geom::TriangleMesh>(buildings_along(sc.background.centerline, 10.0, 3))});
  auto blocker = vehicle("blocker", ScriptedMode{BehaviorParams{}}, Vec3(0.7, 0.15, 0.1));
  blocker.x = 40.0;
  sc.participants.push_back(blocker);
  return sc;
}

Scenario crossing_scenario(bool mirrored) {
  auto sc = base(mirrored ? "crossing_mirrored" : "crossing", SimMode::multi_agent);
  const double m = mirrored ? -1.0 : 1.0;
  sc.ego = vehicle("a", AgentMode{"a", Command::straight}, Vec3(0.2, 0.3, 0.7));
  sc.ego.x = -32.0;
  sc.ego.initial_speed = 10.0;
  sc.ego.route = geom::Polyline{{Vec2(-100, 0), Vec2(100, 0)}};
  auto b = vehicle("b", AgentMode{"b", Command::straight}, Vec3(0.7, 0.15, 0.1));
  b.y = -20.0 * m;
  b.heading = m * kPi / 2;
  b.initial_speed = 10.0;
  b.route = geom::Polyline{{Vec2(0, -100 * m), Vec2(0, 100 * m)}};
  sc.participants.push_back(b);
  sc.background.centerline = *sc.ego.route;
  sc.background.drivable = {geom::buffer_polyline(*sc.ego.route, 5.0),
                            geom::buffer_polyline(geom::Polyline{{Vec2(0, -100), Vec2(0, 100)}}, 5.0)};
  // Corner blocks, symmetric about both axes.
  geom::TriangleMesh blocks;
  for (double sx : {-1.0, 1.0})
    for (double sy : {-1.0, 1.0}) append(blocks, box_at(Vec3(8.0, 8.0, 3.0), sx * 20.0, sy * 20.0, 0.0, Vec3(0.6, 0.55, 0.5)));
  blocks.albedo.assign(1, Vec3(0.6, 0.55, 0.5));
  sc.background.meshes.push_back({"", std::make_shared<geom::TriangleMesh>(blocks)});
  if (mirrored) sc.background.sun = Vec3(0.4, -0.3, 0.866);
  return sc;
}

void write_scenario(const std::filesystem::path& dir, Scenario sc) {
  const auto assets = dir / "assets";
  std::filesystem::create_directories(assets);
  for (std::size_t i = 0; i < sc.background.meshes.size(); ++i) {
    auto& bm = sc.background.meshes[i];
    bm.path = "assets/" + sc.name + "_background" + (i ? std::to_string(i) : "") + ".obj";
    geom::save_mesh(dir / bm.path, *bm.mesh);
  }
  auto save = [&](Participant& p) {
    if (!p.trajectory) return;
    p.trajectory_path = "assets/" + sc.name + "_" + p.id + ".csv";
    write_trajectory_csv(dir / p.trajectory_path, *p.trajectory);
  };
  save(sc.ego);
  for (auto& p : sc.participants) save(p);
  std::ofstream out(dir / (sc.name + ".ini"));
  out << serialize_scenario(sc);
  if (!out) throw IoError("cannot write " + (dir / (sc.name + ".ini")).string());
}

}  // namespace drivesim::scene
