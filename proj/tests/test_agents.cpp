#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <thread>

#include "drivesim/agents/agent.hpp"
#include "drivesim/common/error.hpp"

using namespace drivesim;
using namespace drivesim::agents;

namespace {

std::vector<std::uint8_t> fixture(const std::string& name) {
  std::ifstream in("tests/fixtures/protocol/" + name, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Welcome expected_welcome() {
  Welcome w;
  w.agent_id = "ego";
  w.dt = 0.1;
  w.plan_steps = 8;
  w.total_steps = 40;
  w.command = scene::Command::straight;
  w.route = {{0.0, 0.0}, {50.0, 0.0}, {100.0, 5.0}};
  w.params = {{"a_brake", 4.0}, {"margin", 3.0}};
  return w;
}

Observation expected_observation() {
  Observation o;
  o.step = 3;
  o.ego = {0.3, 1.5, -0.25, 0.1, 5.0, 0.5, scene::Command::left};
  o.bev_cells = 2;
  o.bev_extent = 4.0;
  o.bev = {0, 1, 2, 0, 0, 0, 5, 0.5};
  o.images = {WireImage{2, 1, {255, 0, 0, 0, 128, 255}}};
  o.points = {{1, 2, 3}, {-0.5f, 0.25f, 1.75f}};
  return o;
}

Plan expected_plan() {
  return Plan{3, {{{0.4, 2.0, -0.25, 0.1, 5.0}, {0.5, 2.5, -0.2, 0.1, 5.0}, {0.6, 3.0, -0.15, 0.1, 5.0}}}};
}

Observation blank_observation(double v, int cells = 64, double extent = 32.0) {
  Observation o;
  o.ego.v = v;
  o.bev_cells = std::uint32_t(cells);
  o.bev_extent = extent;
  o.bev.assign(std::size_t(cells) * cells * 2, 0.0f);
  return o;
}

// Marks the BEV cell holding ego-frame point (x, y) as occupied above the split.
void occupy(Observation& o, double x, double y) {
  const double cs = 2.0 * o.bev_extent / o.bev_cells;
  const int ix = int(std::floor((x + o.bev_extent) / cs)), iy = int(std::floor((y + o.bev_extent) / cs));
  o.bev[(std::size_t(ix) * o.bev_cells + iy) * 2 + 1] = 3.0f;
}

Welcome straight_session(double cruise = -1.0) {
  Welcome w;
  w.agent_id = "ego";
  w.dt = 0.1;
  w.plan_steps = 8;
  w.route = {{-100.0, 0.0}, {500.0, 0.0}};
  if (cruise > 0) w.params["cruise"] = cruise;
  return w;
}

std::string temp_socket(const std::string& name) {
  return "unix:" + (std::filesystem::temp_directory_path() / ("drivesim_" + name + ".sock")).string();
}

}  // namespace

TEST_CASE("golden frames decode to the expected messages and re-encode byte for byte") {
  const std::vector<std::pair<std::string, Message>> cases{
      {"hello.bin", Hello{"ego"}},
      {"welcome.bin", expected_welcome()},
      {"observation.bin", expected_observation()},
      {"plan.bin", expected_plan()},
      {"error.bin", ErrorMessage{ErrorCode::version_mismatch, "protocol version 2, expected 1"}},
      {"bye.bin", Bye{"completed"}},
  };
  for (const auto& [name, msg] : cases) {
    CAPTURE(name);
    const auto bytes = fixture(name);
    CHECK(decode(bytes) == msg);
    CHECK(encode(msg) == bytes);
    CHECK(encode(decode(bytes)) == bytes);
  }
}

TEST_CASE("malformed frames are rejected") {
  CHECK_THROWS_AS(decode(fixture("bad_length.bin")), ProtocolError);
  CHECK_THROWS_AS(decode(fixture("bad_version.bin")), VersionMismatch);
  CHECK_THROWS_AS(decode(fixture("truncated_plan.bin")), ProtocolError);
  CHECK_THROWS_AS(decode(fixture("trailing_bytes.bin")), ProtocolError);
  std::vector<std::uint8_t> huge{0xff, 0xff, 0xff, 0xff, 1, 1};
  CHECK_THROWS_AS(decode(huge), ProtocolError);
  auto unknown = encode(Bye{"x"});
  unknown[4] = 42;
  CHECK_THROWS_AS(decode(unknown), ProtocolError);
  // A corrupt element count cannot make the decoder allocate past the frame.
  auto plan = encode(expected_plan());
  plan[10] = 0xff;
  plan[11] = 0xff;
  CHECK_THROWS_AS(decode(plan), ProtocolError);
}

TEST_CASE("random messages round-trip") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int i = 0; i < 200; ++i) {
    Observation o = blank_observation(u(rng), 1 + int(rng() % 6), 10.0);
    o.step = std::uint32_t(rng());
    o.ego = {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), scene::Command(rng() % 4)};
    for (auto& c : o.bev) c = float(u(rng));
    for (int k = 0; k < int(rng() % 3); ++k) {
      WireImage img{std::uint32_t(1 + rng() % 4), std::uint32_t(1 + rng() % 4), {}};
      for (std::size_t b = 0; b < std::size_t(img.width) * img.height * 3; ++b) img.rgb.push_back(std::uint8_t(rng()));
      o.images.push_back(img);
    }
    for (int k = 0; k < int(rng() % 20); ++k) o.points.push_back({float(u(rng)), float(u(rng)), float(u(rng))});
    const auto bytes = encode(o);
    CHECK(decode(bytes) == Message(o));
    CHECK(encode(decode(bytes)) == bytes);

    Plan p;
    p.step = std::uint32_t(rng());
    for (int k = 0; k < 2 + int(rng() % 10); ++k) p.trajectory.samples.push_back({k * 0.1, u(rng), u(rng), u(rng), u(rng)});
    CHECK(decode(encode(p)) == Message(p));
  }
}

TEST_CASE("endpoints parse") {
  auto t = Endpoint::parse("tcp://127.0.0.1:5555");
  CHECK(t.kind == Endpoint::Kind::tcp);
  CHECK(t.port == 5555);
  CHECK(t.str() == "tcp://127.0.0.1:5555");
  auto u = Endpoint::parse("unix:/tmp/x.sock");
  CHECK(u.kind == Endpoint::Kind::unix_socket);
  CHECK(u.path == "/tmp/x.sock");
  CHECK_THROWS_AS(Endpoint::parse("tcp://host"), ValidationError);
  CHECK_THROWS_AS(Endpoint::parse("tcp://1.2.3.4:99999"), ValidationError);
  CHECK_THROWS_AS(Endpoint::parse("http://x:1"), ValidationError);
  CHECK(Endpoint::looks_like("unix:/a"));
  CHECK_FALSE(Endpoint::looks_like("rule"));
}

TEST_CASE("constant velocity plans") {
  EgoStatus e{2.0, 1.0, 2.0, 0.0, 0.0};
  for (const auto& s : constant_velocity_plan(e, 0.1, 8).samples) {
    CHECK(s.x == 1.0);
    CHECK(s.y == 2.0);
  }
  e.v = 10.0;
  auto p = constant_velocity_plan(e, 0.1, 8);
  REQUIRE(p.size() == 8);
  for (int k = 1; k <= 8; ++k) {
    CHECK(p.samples[k - 1].t == doctest::Approx(2.0 + 0.1 * k));
    CHECK(p.samples[k - 1].x == doctest::Approx(1.0 + k));
  }
  e.heading = kPi / 2;
  p = constant_velocity_plan(e, 0.1, 8);
  CHECK(p.samples[4].y == doctest::Approx(2.0 + 5.0));
  CHECK(p.samples[4].x == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("replay plans") {
  scene::Trajectory rec;
  for (int k = 0; k <= 20; ++k) rec.samples.push_back({0.1 * k, 2.0 * k, 0.1 * k * k, 0.05 * k, 20.0});
  auto p = replay_plan(rec, 0.0, 0.1, 8);
  for (int k = 0; k < 8; ++k) CHECK(p.samples[k] == rec.samples[k]);
  p = replay_plan(rec, 5.0, 0.1, 4);
  for (const auto& s : p.samples) {
    CHECK(s.x == rec.back().x);
    CHECK(s.y == rec.back().y);
  }
  CHECK(p.samples[1].t > p.samples[0].t);
  p = replay_plan(rec, 0.35, 0.1, 3);
  for (int k = 0; k < 3; ++k) {
    const auto o = scene::sample(rec, 0.35 + 0.1 * k);
    CHECK(p.samples[k].x == doctest::Approx(o.x));
    CHECK(p.samples[k].y == doctest::Approx(o.y));
    CHECK(p.samples[k].heading == doctest::Approx(o.heading));
  }
}

TEST_CASE("rule agent cruises on a clear corridor") {
  RulePlanner rp;
  rp.begin(straight_session(10.0));
  auto obs = blank_observation(10.0);
  auto p = rp.plan(obs);
  CHECK_FALSE(rp.braking());
  for (const auto& s : p.samples) {
    CHECK(s.v == doctest::Approx(10.0));
    CHECK(s.y == 0.0);
  }
  // Occupancy beside the corridor or behind is ignored.
  occupy(obs, 10.0, 4.0);
  occupy(obs, -8.0, 0.0);
  rp.plan(obs);
  CHECK_FALSE(rp.braking());
}

TEST_CASE("rule agent brakes once a blocker enters the corridor and stops short of it") {
  RuleParams params;
  const double v0 = 10.0, blocker_rear = 40.0;
  RulePlanner rp;
  rp.begin(straight_session(v0));
  double x = 0.0, v = v0, a = 0.0;
  bool braked = false;
  for (int step = 0; step < 80; ++step) {
    auto obs = blank_observation(v);
    obs.ego.x = x;
    obs.ego.a = a;
    for (double lx = blocker_rear - x; lx < blocker_rear - x + 4.5; lx += 0.5)
      for (double ly = -0.9; ly <= 0.9; ly += 0.3)
        if (std::abs(lx) < obs.bev_extent) occupy(obs, lx, ly);
    const double gap = blocker_rear - x - params.front_offset;
    auto p = rp.plan(obs);
    if (!braked && rp.braking()) {
      braked = true;
      CHECK(gap <= corridor_length(v, params) + 1.0);
      CHECK(p.samples.back().v < v);
    }
    if (gap > corridor_length(v, params) + 1.0) CHECK_FALSE(rp.braking());
    // Follow the plan exactly for one step.
    const auto& w = p.samples[1];
    a = (w.v - v) / 0.1;
    x = w.x;
    v = w.v;
  }
  CHECK(braked);
  CHECK(v == 0.0);
  CHECK(x + params.front_offset < blocker_rear);
  CHECK(x + params.front_offset > blocker_rear - params.margin - 2.0);
}

TEST_CASE("rule agent ignores a blocker beyond the corridor") {
  RulePlanner rp;
  rp.begin(straight_session(10.0));
  auto obs = blank_observation(10.0);
  occupy(obs, 2.25 + corridor_length(10.0, RuleParams{}) + 4.0, 0.0);
  auto p = rp.plan(obs);
  CHECK_FALSE(rp.braking());
  CHECK(p.samples.back().v == doctest::Approx(10.0));
  CHECK(corridor_gap(obs, geom::Polyline{{Vec2(-100, 0), Vec2(500, 0)}}, RuleParams{}) > 19.0);
}

TEST_CASE("rule parameters are validated") {
  CHECK(RuleParams::from({{"a_brake", 3.0}}).a_brake == 3.0);
  CHECK_THROWS_AS(RuleParams::from({{"bogus", 1.0}}), ValidationError);
  CHECK_THROWS_AS(RuleParams::from({{"a_brake", -1.0}}), ValidationError);
}

TEST_CASE("handshake, lockstep turn and bye over a socket") {
  Listener listener(Endpoint::parse(temp_socket("turn")));
  int plans = -1;
  std::thread client([&] {
    ConstantVelocityPlanner cv;
    plans = serve_planner(listener.endpoint(), "ego", cv, 5.0);
  });
  auto handles = accept_agents(listener, {"ego"}, 5.0);
  REQUIRE(handles.count("ego"));
  auto& h = *handles.at("ego");
  h.start(straight_session());
  for (std::uint32_t k = 0; k < 3; ++k) {
    auto obs = blank_observation(5.0, 4, 8.0);
    obs.step = k;
    obs.ego.t = 0.1 * k;
    h.post(obs);
    auto p = h.collect(k, 5.0);
    CHECK(p.step == k);
    CHECK(p.trajectory == constant_velocity_plan(obs.ego, 0.1, 8));
  }
  h.finish("completed");
  client.join();
  CHECK(plans == 3);
}

TEST_CASE("tcp endpoint with an assigned port") {
  Listener listener(Endpoint::parse("tcp://127.0.0.1:0"));
  CHECK(listener.endpoint().port != 0);
  std::thread client([&] {
    ConstantVelocityPlanner cv;
    serve_planner(listener.endpoint(), "a", cv, 5.0);
  });
  auto handles = accept_agents(listener, {"a"}, 5.0);
  auto w = straight_session();
  w.agent_id = "a";
  handles.at("a")->start(w);
  handles.at("a")->finish("completed");
  client.join();
}

TEST_CASE("a wrong protocol version is refused and the right client still gets in") {
  Listener listener(Endpoint::parse(temp_socket("refuse")));
  bool version_refused = false;
  std::thread bad([&] {
    try {
      AgentClient::connect(listener.endpoint(), "ego", 5.0, 2);
    } catch (const VersionMismatch&) {
      version_refused = true;
    } catch (const std::exception&) {
    }
  });
  std::optional<AgentClient> good;
  std::thread ok([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    try {
      good.emplace(AgentClient::connect(listener.endpoint(), "ego", 5.0));
    } catch (const std::exception&) {
    }
  });
  auto handles = accept_agents(listener, {"ego"}, 5.0);
  handles.at("ego")->start(straight_session());
  bad.join();
  ok.join();
  CHECK(version_refused);
  REQUIRE(good.has_value());
  CHECK(good->session().agent_id == "ego");
  handles.at("ego")->finish("completed");
}

TEST_CASE("duplicate agent id within one accept round") {
  Listener listener(Endpoint::parse(temp_socket("dup")));
  std::optional<AgentClient> first;
  bool refused = false;
  std::thread a([&] {
    try {
      first.emplace(AgentClient::connect(listener.endpoint(), "x", 5.0));
    } catch (const std::exception&) {
    }
  });
  std::thread b([&] {
    // Give the first client a head start so the order is fixed.
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    try {
      AgentClient::connect(listener.endpoint(), "x", 5.0);
    } catch (const DuplicateAgentId&) {
      refused = true;
    } catch (const std::exception&) {
    }
  });
  CHECK_THROWS_AS(accept_agents(listener, {"x", "y"}, 1.0), AgentTimeout);
  b.join();
  a.join();
  CHECK(refused);
}

TEST_CASE("malformed length prefix from an agent is a protocol error and disconnects it") {
  Listener listener(Endpoint::parse(temp_socket("malformed")));
  bool disconnected = false;
  std::thread client([&] {
    auto c = agents::connect(listener.endpoint(), 5.0);
    c.send(Hello{"ego"});
    auto w = c.receive(5.0);
    REQUIRE(w);
    auto o = c.receive(5.0);
    const std::uint8_t bad[] = {1, 0, 0, 0, 4};
    c.send_raw(bad);
    try {
      while (c.receive(5.0)) {
      }
    } catch (const AgentDisconnected&) {
      disconnected = true;
    }
  });
  auto handles = accept_agents(listener, {"ego"}, 5.0);
  auto& h = *handles.at("ego");
  h.start(straight_session());
  h.post(blank_observation(1.0, 2, 2.0));
  CHECK_THROWS_AS(h.collect(0, 5.0), ProtocolError);
  client.join();
  CHECK(disconnected);
}

TEST_CASE("silent agent times out with its id and step") {
  Listener listener(Endpoint::parse(temp_socket("timeout")));
  std::thread client([&] {
    auto c = AgentClient::connect(listener.endpoint(), "slow", 5.0);
    try {
      while (c.next_observation(5.0)) {
      }
    } catch (const std::exception&) {
    }
  });
  auto handles = accept_agents(listener, {"slow"}, 5.0);
  auto& h = *handles.at("slow");
  auto w = straight_session();
  w.agent_id = "slow";
  h.start(w);
  auto obs = blank_observation(1.0, 2, 2.0);
  obs.step = 7;
  h.post(obs);
  try {
    h.collect(7, 0.2);
    FAIL("expected a timeout");
  } catch (const AgentTimeout& e) {
    CHECK(e.agent_id() == "slow");
    CHECK(e.step() == 7);
  }
  client.join();
}
