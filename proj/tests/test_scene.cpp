#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "drivesim/common/error.hpp"
#include "drivesim/scene/compose.hpp"

using namespace drivesim;
using namespace drivesim::scene;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() : path(std::filesystem::temp_directory_path() / "drivesim_test_scene") {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

const char* kMinimal = R"([scenario]
name = minimal

[background]
drivable = -50,-5 50,-5 50,5 -50,5
centerline = -50,0 50,0

[ego]
x = -40
speed = 5
)";

std::string with(const std::string& extra) { return std::string(kMinimal) + extra; }

void write_recording(const TempDir& d, const std::string& name) {
  Trajectory tr;
  for (int k = 0; k <= 50; ++k) tr.samples.push_back({0.1 * k, 10.0 + 0.5 * k, 2.0, 0.0, 5.0});
  write_trajectory_csv(d.path / name, tr);
}

}  // namespace

TEST_CASE("minimal scenario loads with defaults") {
  TempDir d;
  auto sc = load_scenario(d.write("m.ini", kMinimal));
  CHECK(sc.name == "minimal");
  CHECK(sc.mode == SimMode::non_reactive);
  CHECK(sc.participants.empty());
  CHECK(sc.ego.is_agent());
  CHECK(sc.ego.agent_id() == "ego");
  CHECK(sc.ego.x == -40.0);
  CHECK(sc.sim.dt == 0.1);
  CHECK(sc.sim.steps == 40);
  CHECK(sc.background.drivable.size() == 1);
  CHECK(sc.scoring.w_ep == 5.0);
  CHECK(sc.reference_progress(sc.ego) == doctest::Approx(5.0 * 4.0));
}

TEST_CASE("scenario errors") {
  TempDir d;
  SUBCASE("replay participant without trajectory") {
    CHECK_THROWS_AS(load_scenario(d.write("a.ini", with("\n[participant.car]\nmode = replay\n"))), ValidationError);
  }
  SUBCASE("bad number names line and field") {
    try {
      load_scenario(d.write("b.ini", with("\n[participant.car]\nmode = scripted\nbehavior = stationary\nx = 1o\n")));
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 15);
      CHECK(e.field() == "participant.car.x");
    }
  }
  SUBCASE("unknown key") {
    CHECK_THROWS_AS(load_scenario(d.write("c.ini", with("spead = 3\n"))), ParseError);
  }
  SUBCASE("unknown behavior") {
    CHECK_THROWS_AS(load_scenario(d.write("e.ini", with("\n[participant.car]\nmode = scripted\nbehavior = drift\n"))),
                    ParseError);
    CHECK_THROWS_AS(parse_behavior("drift"), UnknownBehavior);
  }
  SUBCASE("missing asset") {
    CHECK_THROWS_AS(load_scenario(d.write("f.ini", with("trajectory = nope.csv\n"))), MissingAsset);
    CHECK_THROWS_AS(load_scenario(d.path / "absent.ini"), MissingAsset);
  }
  SUBCASE("duplicate key") { CHECK_THROWS_AS(load_scenario(d.write("g.ini", with("x = 3\n"))), ParseError); }
  SUBCASE("multi-agent needs two agents") {
    auto text = std::string(kMinimal);
    text.replace(text.find("name = minimal"), 14, "name = m\nmode = multi_agent");
    CHECK_THROWS_AS(load_scenario(d.write("h.ini", text)), ValidationError);
  }
  SUBCASE("second agent outside multi-agent mode") {
    CHECK_THROWS_AS(load_scenario(d.write("i.ini", with("\n[participant.b]\nmode = agent\n"))), ValidationError);
  }
  SUBCASE("bad rig") {
    CHECK_THROWS_AS(load_scenario(d.write("j.ini", with("\n[sensors]\ncamera.0.intrinsics = 100 100 500 50\n"
                                                         "camera.0.resolution = 64 48\n"))),
                    InvalidRig);
  }
}

TEST_CASE("scenario serialization round-trips") {
  TempDir d;
  write_recording(d, "rec.csv");
  geom::save_mesh(d.path / "wall.mesh", geom::make_box(Vec3(1, 5, 2), Vec3(0.6, 0.5, 0.4)));
  auto src = d.write("full.ini", R"([scenario]
name = full
mode = safety_test

[background]
meshes = wall.mesh
ground_z = 0.0
drivable = -50,-5 50,-5 50,5 -50,5; 0,5 4,5 4,30 0,30
centerline = -50,0 0,0 50,0
sky = 0.5 0.6 0.7
sun = 0.3 0.2 0.9

[ego]
x = -40
heading = 0.1
speed = 5
rule.cruise_speed = 6.5
rule.corridor_half_width = 1.5

[participant.lead]
trajectory = rec.csv
albedo = 0.1 0.2 0.3
roughness = 0.3

[participant.blocker]
mode = scripted
behavior = sudden_brake
x = 10
y = 0
speed = 8
trigger_distance = 15
a_brake = 4

[sensors]
camera.0.intrinsics = 100 100 32 24
camera.0.resolution = 64 48
camera.0.mount = 1.5 0 1.4 0 0.05 0
lidar.channels = 16
lidar.vfov = -0.3 0.2
bev.cells = 32

[sim]
dt = 0.05
steps = 20
seed = 7
controller.q_lat = 2 0.25

[scoring]
w_ep = 1
comfort.jerk_max = 6.5
)");
  auto a = load_scenario(src);
  CHECK(a.participants.size() == 2);
  CHECK(a.participants[0].x == 10.0);  // from the recording
  CHECK(a.ego.agent_params.at("cruise_speed") == 6.5);
  CHECK(a.sensors.cameras.size() == 1);
  CHECK(a.sim.controller.q_lat[0] == 2.0);
  CHECK(a.background.drivable.size() == 2);

  auto text1 = serialize_scenario(a);
  auto b = load_scenario(d.write("full2.ini", text1));
  auto text2 = serialize_scenario(b);
  CHECK(text1 == text2);
  auto c = load_scenario(d.write("full3.ini", text2));
  CHECK(serialize_scenario(c) == text2);
  CHECK(b.sim == a.sim);
  CHECK(b.scoring == a.scoring);
  CHECK(*b.participants[0].trajectory == *a.participants[0].trajectory);
  CHECK(b.participants[1].mode == a.participants[1].mode);
  CHECK(b.sensors.cameras[0].mount == a.sensors.cameras[0].mount);
}

TEST_CASE("scripted behaviors") {
  const auto init = geom::Pose::planar(5, 1, 0.0);
  BehaviorParams brake{BehaviorKind::sudden_brake};
  brake.a_brake = 4.0;
  SUBCASE("sudden brake before trigger advances at constant speed") {
    auto s = scripted_behavior(brake, init, 8.0, 1.5, -1.0);
    CHECK(s.pose.translation.x() == doctest::Approx(5 + 12.0));
    CHECK(s.v == 8.0);
  }
  SUBCASE("sudden brake stops 2 s after trigger") {
    auto s = scripted_behavior(brake, init, 8.0, 3.0, 1.0);
    CHECK(s.v == 0.0);
    // 8 m before the trigger, then v^2 / 2a = 8 m of braking.
    CHECK(s.pose.translation.x() == doctest::Approx(5 + 8 + 8));
    auto mid = scripted_behavior(brake, init, 8.0, 2.0, 1.0);
    CHECK(mid.v == doctest::Approx(4.0));
  }
  SUBCASE("cut-in reaches one lane width") {
    BehaviorParams cut{BehaviorKind::cut_in};
    cut.lane_width = 3.5;
    cut.cut_duration = 2.0;
    cut.cut_direction = -1.0;
    auto done = scripted_behavior(cut, init, 10.0, 5.0, 2.0);
    CHECK(done.pose.translation.y() == doctest::Approx(1 - 3.5));
    CHECK(done.pose.yaw() == doctest::Approx(0.0));
    auto during = scripted_behavior(cut, init, 10.0, 3.0, 2.0);
    CHECK(during.pose.translation.y() == doctest::Approx(1 - 1.75));
    CHECK(during.pose.yaw() == doctest::Approx(std::atan2(-1.75, 10.0)));
  }
  SUBCASE("stationary and crossing") {
    auto st = scripted_behavior({BehaviorKind::stationary}, init, 3.0, 7.0, 0.0);
    CHECK(st.pose.translation == init.translation);
    CHECK(st.v == 0.0);
    auto cross = scripted_behavior({BehaviorKind::intersection_cross}, geom::Pose::planar(0, -20, kPi / 2), 5.0, 2.0, -1);
    CHECK(cross.pose.translation.y() == doctest::Approx(-10.0));
    CHECK(std::abs(cross.pose.translation.x()) < 1e-12);
  }
}

TEST_CASE("compose") {
  TempDir d;
  write_recording(d, "rec.csv");
  auto sc = load_scenario(d.write("c.ini", with(R"(
[participant.lead]
trajectory = rec.csv

[participant.block]
mode = scripted
behavior = stationary
x = 30
y = -2

[participant.brake]
mode = scripted
behavior = sudden_brake
x = -20
y = 3
speed = 6
trigger_distance = 12
)")));
  std::map<std::string, control::EgoState> agents{{"ego", {0.0, -40, 0, 0, 5}}};
  SUBCASE("t = 0 puts everyone at the initial pose") {
    auto w = compose(sc, 0.0, agents);
    REQUIRE(w.participants.size() == 4);
    CHECK(w.participants[0].participant->id == "ego");
    for (const auto& p : w.participants) {
      CHECK(p.pose.translation.x() == doctest::Approx(p.participant->x));
      CHECK(p.pose.translation.y() == doctest::Approx(p.participant->y));
    }
  }
  SUBCASE("replay interpolates") {
    auto w = compose(sc, 1.25, agents);
    CHECK(w.find("lead")->pose.translation.x() == doctest::Approx(10 + 0.5 * 12.5));
    CHECK(w.find("block")->pose.translation.x() == 30.0);
  }
  SUBCASE("pure") {
    auto a = compose(sc, 2.3, agents), b = compose(sc, 2.3, agents);
    for (std::size_t i = 0; i < a.participants.size(); ++i) {
      CHECK(std::memcmp(a.participants[i].pose.translation.data(), b.participants[i].pose.translation.data(),
                        sizeof(double) * 3) == 0);
      CHECK(a.participants[i].v == b.participants[i].v);
    }
  }
  SUBCASE("missing agent state") { CHECK_THROWS_AS(compose(sc, 0.0, {}), MissingAgentState); }
  SUBCASE("distance trigger") {
    TriggerTimes trig;
    auto far = compose(sc, 0.0, agents, trig);
    update_triggers(far, trig);
    CHECK(trig.empty());
    agents["ego"].x = -25;
    auto near = compose(sc, 1.0, agents, trig);
    update_triggers(near, trig);
    REQUIRE(trig.count("brake"));
    CHECK(trig["brake"] == 1.0);
    auto later = compose(sc, 2.0, agents, trig);
    CHECK(later.find("brake")->v == doctest::Approx(6 - 4));
  }
}

TEST_CASE("find_scenarios sorts recursively") {
  TempDir d;
  std::filesystem::create_directories(d.path / "b");
  d.write("b/z.ini", kMinimal);
  d.write("a.ini", kMinimal);
  d.write("notes.txt", "");
  auto found = find_scenarios(d.path);
  REQUIRE(found.size() == 2);
  CHECK(found[0].filename() == "a.ini");
}
