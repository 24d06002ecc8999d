// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <fmt/core.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "drivesim/common/error.hpp"
#include "drivesim/common/rng.hpp"
#include "drivesim/registration/registration.hpp"
#include "drivesim/relight/relight.hpp"
#include "drivesim/score/score.hpp"
#include "drivesim/sensors/render.hpp"
#include "drivesim/simloop/simloop.hpp"
#include "support/synthetic.hpp"

using namespace drivesim;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  fmt::print("{} {}: {}\n", pass ? "PASS" : "FAIL", name, detail);
  std::fflush(stdout);
  failures += !pass;
}

template <class F>
void criterion(const std::string& name, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(name, false, std::string("threw: ") + e.what());
  }
}

using Handles = std::map<std::string, std::unique_ptr<agents::AgentHandle>>;

Handles builtin(const scene::Scenario& sc, const std::string& name) {
  Handles h;
  for (const auto* p : sc.agents())
    h[p->agent_id()] = std::make_unique<agents::InProcessAgent>(agents::make_builtin(name, *p));
  return h;
}

// ---------------------------------------------------------------------------

void pdms_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    score::Subscores s{u(rng) < 0.2 ? 0.0 : 1.0, u(rng) < 0.2 ? 0.0 : 1.0, u(rng), u(rng), u(rng)};
    score::ScoreConfig cfg;
    cfg.w_ep = 1e-3 + 10 * u(rng);
    cfg.w_ttc = 1e-3 + 10 * u(rng);
    cfg.w_c = 1e-3 + 10 * u(rng);
    // Oracle in extended precision, penalties applied last.
    const long double num = (long double)cfg.w_ttc * s.ttc + (long double)cfg.w_c * s.comfort + (long double)cfg.w_ep * s.ep;
    const long double den = (long double)cfg.w_c + cfg.w_ttc + cfg.w_ep;
    const long double expect = (num / den) * s.dac * s.nc;
    worst = std::max(worst, double(std::fabs((long double)score::pdms(s, cfg) - expect)));
  }
  const score::ScoreConfig def;
  const bool ex1 = score::pdms({1, 1, 1, 1, 1}, def) == 1.0;
  const bool ex2 = score::pdms({0, 1, 1, 1, 1}, def) == 0.0;
  const bool ex3 = score::pdms({1, 1, 1, 1, 0.5}, def) == 9.5 / 12.0;
  report("pdms oracle equivalence", worst <= 1e-12 && ex1 && ex2 && ex3,
         fmt::format("max |pdms - oracle| = {:.3g} over 10000 tuples (tol 1e-12); examples 1.0/0.0/9.5/12 exact: {}/{}/{}",
                     worst, ex1, ex2, ex3));
}

void open_closed_consistency() {
  const auto t0 = Clock::now();
  const auto files = scene::find_scenarios("suites/non_reactive");
  double worst = 0.0;
  std::string worst_where;
  std::size_t count = 0;
  for (const auto& f : files) {
    const auto sc = scene::load_scenario(f);
    if (sc.mode != scene::SimMode::non_reactive) continue;
    ++count;
    auto handles = builtin(sc, "replay");
    const auto closed = simloop::run(sc, handles);
    const auto open = simloop::open_loop_log(sc);
    for (std::size_t a = 0; a < closed.header.agents.size(); ++a) {
      const auto x = score::score_agent(closed, int(a), sc.scoring).sub;
      const auto y = score::score_agent(open, int(a), sc.scoring).sub;
      const std::pair<const char*, double> diffs[] = {{"nc", std::abs(x.nc - y.nc)},
                                                      {"dac", std::abs(x.dac - y.dac)},
                                                      {"ttc", std::abs(x.ttc - y.ttc)},
                                                      {"comfort", std::abs(x.comfort - y.comfort)},
                                                      {"ep", std::abs(x.ep - y.ep)}};
      for (const auto& [name, d] : diffs)
        if (d > worst) {
          worst = d;
          worst_where = sc.name + "." + name;
        }
    }
  }
  const double secs = seconds_since(t0);
  report("open/closed consistency", count == 14 && worst <= 1e-6 && secs < 120.0,
         fmt::format("{} scenarios, max subscore difference {:.3g}{} (tol 1e-6), {:.1f} s (limit 120 s)", count, worst,
                     worst > 0 ? " at " + worst_where : "", secs));
}

void safety_discrimination() {
  const auto sc = scene::load_scenario("suites/safety/stationary_blocker.ini");
  auto cv_handles = builtin(sc, "constant_velocity");
  const auto cv = score::score_agent(simloop::run(sc, cv_handles), 0, sc.scoring);
  auto rule_handles = builtin(sc, "rule");
  const auto rule = score::score_agent(simloop::run(sc, rule_handles), 0, sc.scoring);

  // First logged step at which the bumpers have met, moving at constant speed.
  const auto& blocker = *sc.find("blocker");
  const double contact_distance =
      (blocker.x - sc.ego.x) - (blocker.half_extents.x() + sc.ego.half_extents.x());
  const int predicted = int(std::ceil(contact_distance / (sc.ego.initial_speed * sc.sim.dt)));
  const int got = cv.collision_step ? *cv.collision_step : -1;
  const bool pass = cv.sub.nc == 0.0 && cv.pdms == 0.0 && rule.sub.nc == 1.0 && rule.pdms > 0.5 && got >= 0 &&
                    std::abs(got - predicted) <= 1;
  report("safety-test discrimination", pass,
         fmt::format("constant velocity NC={} PDMS={} collision step {} (predicted {}); rule NC={} PDMS={:.4f}",
                     cv.sub.nc, cv.pdms, got, predicted, rule.sub.nc, rule.pdms));
}

simloop::SimLog run_over_socket(const scene::Scenario& sc, const std::string& tag, int& protocol_errors) {
  const auto ep = agents::Endpoint::parse("unix:" + (fs::temp_directory_path() / ("drivesim_accept_" + tag + ".sock")).string());
  agents::Listener listener(ep);
  std::vector<std::thread> clients;
  std::vector<int> errors(sc.agents().size(), 0);
  for (std::size_t i = 0; i < sc.agents().size(); ++i) {
    const auto id = sc.agents()[i]->agent_id();
    clients.emplace_back([&, id, i] {
      try {
        agents::RulePlanner rule;
        agents::serve_planner(listener.endpoint(), id, rule, 30.0);
      } catch (const std::exception&) {
        errors[i] = 1;
      }
    });
  }
  simloop::SimLog log;
  try {
    auto handles = agents::accept_agents(listener, [&] {
      std::set<std::string> ids;
      for (const auto* p : sc.agents()) ids.insert(p->agent_id());
      return ids;
    }(), 30.0);
    log = simloop::run(sc, handles);
  } catch (const ProtocolError&) {
    ++protocol_errors;
  } catch (const AgentTimeout&) {
    ++protocol_errors;
  }
  for (auto& t : clients) t.join();
  for (int e : errors) protocol_errors += e;
  return log;
}

void multi_agent_lockstep() {
  const auto sc = scene::load_scenario("suites/multi_agent/crossing.ini");
  const auto mc = scene::load_scenario("suites/multi_agent_mirrored/crossing_mirrored.ini");
  int errors = 0;
  const auto log = run_over_socket(sc, "a", errors);
  const auto mirrored = run_over_socket(mc, "b", errors);
  int collisions = 0;
  for (const auto* l : {&log, &mirrored})
    for (const auto& s : l->steps)
      for (const auto& e : s.events) collisions += e.rfind("collision", 0) == 0;
  bool nc = true;
  for (std::size_t a = 0; a < log.header.agents.size(); ++a) nc = nc && score::score_agent(log, int(a), sc.scoring).sub.nc == 1.0;
  double worst = log.steps.size() == mirrored.steps.size() ? 0.0 : INFINITY;
  auto cmp = [&](const std::vector<simloop::ParticipantRecord>& a, const std::vector<simloop::ParticipantRecord>& b) {
    if (a.size() != b.size()) {
      worst = INFINITY;
      return;
    }
    for (std::size_t i = 0; i < a.size(); ++i)
      worst = std::max({worst, std::abs(a[i].x - b[i].x), std::abs(a[i].y + b[i].y),
                        std::abs(wrap_angle(a[i].heading + b[i].heading)), std::abs(a[i].v - b[i].v)});
  };
  for (std::size_t k = 0; k < std::min(log.steps.size(), mirrored.steps.size()); ++k)
    cmp(log.steps[k].states, mirrored.steps[k].states);
  cmp(log.final_states, mirrored.final_states);
  const bool complete = log.steps.size() == 40 && mirrored.steps.size() == 40 && log.termination == "completed" &&
                        mirrored.termination == "completed";
  report("multi-agent lockstep", complete && errors == 0 && collisions == 0 && nc && worst <= 1e-9,
         fmt::format("{} and {} steps over a socket, {} protocol errors, {} collision events, mirror deviation {:.3g} "
                     "(tol 1e-9)",
                     log.steps.size(), mirrored.steps.size(), errors, collisions, worst));
}

void registration_recovery() {
  const auto t0 = Clock::now();
  const auto scene = testing::structured_scene(500, 42);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int recovered = 0, non_monotone = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double r = 0.5 * std::sqrt(u(rng)), phi = 2 * kPi * u(rng);
    const double yaw = deg2rad(2.0) * (2 * u(rng) - 1);
    const auto truth = geom::Pose::planar(r * std::cos(phi), r * std::sin(phi), yaw);
    const auto frame = reg::transform(scene, truth.inverse());
    const auto res = reg::register_frame(frame, scene, geom::Pose::identity());
    const double dt = (res.corrected.translation - truth.translation).head<2>().norm();
    const double dyaw = std::abs(rad2deg(wrap_angle(res.corrected.yaw() - truth.yaw())));
    recovered += dt <= 0.05 && dyaw <= 0.5;
    for (std::size_t i = 1; i < res.trace.size(); ++i)
      if (res.trace[i] > res.trace[i - 1]) {
        ++non_monotone;
        break;
      }
  }
  const double secs = seconds_since(t0);
  report("registration recovery", recovered >= 95 && non_monotone == 0 && secs < 30.0,
         fmt::format("{}/100 recovered within 0.05 m / 0.5 deg (need 95), {} non-monotone traces, {:.1f} s (limit 30 s)",
                     recovered, non_monotone, secs));
}

void compositing_exactness() {
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> uf(0.0f, 1.0f);
  const int w = 50, h = 20;
  RgbImage bg(w, h), fg(w, h);
  GrayImage m(w, h), s(w, h);
  for (auto* img : {&bg.data, &fg.data, &m.data, &s.data})
    for (auto& v : *img) v = uf(rng);
  const auto out = relight::composite(bg, fg, m, s);
  int mismatches = 0;
  for (int i = 0; i < w * h; ++i)
    for (int c = 0; c < 3; ++c) {
      const float expect = (bg.data[3 * i + c] * s.data[i]) * (1.0f - m.data[i]) + fg.data[3 * i + c] * m.data[i];
      mismatches += std::memcmp(&expect, &out.data[3 * i + c], sizeof(float)) != 0;
    }

  std::mt19937_64 r64(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto light = relight::fit_lightmaps({RgbImage(8, 8, 0.4f)}, Vec3(1, 0.3, 1.2));
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    geom::SceneGeometry occ;
    occ.add_mesh(std::make_shared<geom::TriangleMesh>(geom::make_vehicle(3 + 2 * std::abs(u(r64)),
                                                                         1.5 + std::abs(u(r64)), 1 + std::abs(u(r64)),
                                                                         Vec3::Ones())),
                 geom::Pose::planar(3 * u(r64), 3 * u(r64), kPi * u(r64)));
    occ.build();
    const double v = relight::shadow_intensity(Vec3(4 * u(r64), 4 * u(r64), 0), Vec3::UnitZ(), &occ, light, 64, i).value;
    violations += !(v >= 0.0 && v <= 1.0);
  }

  geom::SceneGeometry wall;
  wall.add_mesh(std::make_shared<geom::TriangleMesh>(geom::make_box(Vec3(500, 1000, 500), Vec3::Ones())),
                geom::Pose::from_euler(Vec3(500.001, 0, -1), 0, 0, 0));
  wall.build();
  const double half = relight::shadow_intensity(Vec3::Zero(), Vec3::UnitZ(), &wall,
                                                relight::LightMaps::uniform(Vec3::Ones()), 2048, 3)
                          .value;
  report("compositing exactness", mismatches == 0 && violations == 0 && std::abs(half - 0.5) <= 0.03,
         fmt::format("{} bit mismatches in 1000 pixels, {} out-of-range shadow values in 1000 configurations, "
                     "half-plane {:.4f} (0.5 +- 0.03)",
                     mismatches, violations, half));
}

void furnace() {
  const auto white = relight::LightMaps::uniform(Vec3::Ones());
  double worst = 0.0;
  std::string values;
  for (double a : {0.25, 0.5, 0.9}) {
    relight::Material mat;
    mat.albedo = Vec3::Constant(a);
    mat.specular = 0.0;
    mat.metallic = 0.0;
    const Vec3 c = relight::shade_foreground(Vec3::Zero(), Vec3(0.3, -0.2, 0.9).normalized(), Vec3::UnitZ(), mat,
                                             white, 1024, {7, 0, nullptr});
    for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(c[k] - a) / a);
    values += fmt::format("{}{:.4f}", values.empty() ? "" : ", ", c.x());
  }
  report("shading furnace", worst <= 0.02,
         fmt::format("albedo 0.25/0.5/0.9 -> {}; max relative error {:.4f} (tol 0.02)", values, worst));
}

// Nearest beam by exhaustive search.
std::optional<std::pair<int, int>> brute_bin(const Vec3& q, const sensors::LidarModel& m) {
  const double r = q.norm();
  if (float(r) > float(m.max_range)) return std::nullopt;
  const double el = std::asin(q.z() / r);
  const double half = 0.5 * (m.vfov_max - m.vfov_min) / (m.channels - 1);
  if (el > m.vfov_max + half || el < m.vfov_min - half) return std::nullopt;
  int ch = 0;
  for (int c = 1; c < m.channels; ++c)
    if (std::abs(m.elevation(c) - el) < std::abs(m.elevation(ch) - el)) ch = c;
  const double az = std::atan2(q.y(), q.x());
  int col = 0;
  double best = INFINITY;
  for (int c = 0; c < m.azimuths; ++c) {
    const double d = std::abs(wrap_angle(m.azimuth(c) - az));
    if (d < best) best = d, col = c;
  }
  return std::pair{ch, col};
}

scene::Participant car(const std::string& id, double x, double y, double heading) {
  scene::Participant p;
  p.id = id;
  p.mode = scene::ReplayMode{};
  p.mesh = std::make_shared<geom::TriangleMesh>(geom::make_vehicle(4.5, 1.9, 1.6, Vec3(0.7, 0.1, 0.1)));
  p.x = x;
  p.y = y;
  p.heading = heading;
  return p;
}

void sensor_consistency() {
  using namespace sensors;
  StaticWorld w;
  w.sky = Vec3(0.5, 0.7, 0.9);
  w.light = relight::LightMaps::uniform(Vec3::Ones());
  w.background.add_mesh(std::make_shared<geom::TriangleMesh>(geom::make_quad(200, 0.0, Vec3::Constant(0.3))),
                        geom::Pose::identity(), StaticWorld::kGroundId);
  w.background.add_mesh(std::make_shared<geom::TriangleMesh>(geom::make_box(Vec3(2, 3, 2), Vec3(0.4, 0.6, 0.2))),
                        geom::Pose::planar(14.0, 5.0, 0.4), 1);
  w.background.add_mesh(std::make_shared<geom::TriangleMesh>(geom::make_cylinder_wall(30.0, 0.0, 6.0, 90, Vec3::Constant(0.6))),
                        geom::Pose::identity(), 2);
  w.background.build();
  const std::vector<scene::Participant> ps{car("ego", 0, 0, 0), car("a", 9.0, -1.0, 0.3), car("b", -6, -5, 0)};
  scene::WorldSnapshot snap;
  for (const auto& p : ps) snap.participants.push_back({&p, p.initial_pose(), 0.0, p.footprint_at(p.initial_pose())});
  const DynamicWorld dyn(snap);
  const auto fg = dyn.foreground(0);
  const LidarModel lidar;
  const geom::Pose ego = snap.participants[0].pose;
  const auto range = render_lidar(w, fg, lidar, ego);

  // Shared rays: a camera whose optical axis is a LiDAR beam.
  double worst_depth = 0.0;
  int rays = 0;
  for (int ch = 2; ch < lidar.channels; ch += 5)
    for (int col = 0; col < lidar.azimuths; col += 23) {
      const float ld = range.depth(col, ch);
      if (ld == 0.0f) continue;
      CameraModel cam;
      cam.width = cam.height = 9;
      cam.cx = cam.cy = 4.5;
      cam.mount = lidar.mount;
      cam.mount.yaw = lidar.azimuth(col);
      cam.mount.pitch = -lidar.elevation(ch);
      const auto f = render_camera(w, dyn, fg, cam, ego, RenderOptions{.shade_samples = 1, .shadow_samples = 1});
      worst_depth = std::max(worst_depth, std::abs(double(f.depth(4, 4)) - double(ld)));
      ++rays;
    }

  const geom::Pose sensor = ego * lidar.extrinsic();
  const auto back = reproject_merged(range_image_points(range, lidar, sensor), sensor, lidar);
  const bool exact = back.depth.data == range.depth.data && back.intensity.data == range.intensity.data;

  LidarModel coarse;
  coarse.azimuths = 90;
  coarse.channels = 8;
  CounterRng rng(11, 0);
  reg::PointCloud pc;
  for (int i = 0; i < 1000; ++i) {
    const double az = 2.0 * kPi * std::floor(rng.uniform() * 12) / 12 + 0.02 * (rng.uniform() - 0.5);
    const double el = -0.5 + 0.85 * rng.uniform();
    const double d = 1.0 + 90.0 * rng.uniform();
    pc.points.push_back(d * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)));
    pc.intensity.push_back(float(rng.uniform()));
  }
  const auto merged = reproject_merged(pc, geom::Pose::identity(), coarse);
  std::map<std::pair<int, int>, float> oracle;
  for (const auto& p : pc.points)
    if (auto bin = brute_bin(p, coarse)) {
      const float d = float(p.norm());
      auto it = oracle.find(*bin);
      if (it == oracle.end() || d < it->second) oracle[*bin] = d;
    }
  int mismatches = 0;
  for (int ch = 0; ch < coarse.channels; ++ch)
    for (int col = 0; col < coarse.azimuths; ++col) {
      auto it = oracle.find({ch, col});
      mismatches += merged.depth(col, ch) != (it == oracle.end() ? 0.0f : it->second);
    }
  report("sensor consistency", rays >= 20 && worst_depth <= 1e-4 && exact && mismatches == 0,
         fmt::format("{} shared rays, max |camera - lidar| {:.3g} m (tol 1e-4); self-reprojection exact: {}; "
                     "min-depth rule {} mismatched bins vs brute force on 1000 points",
                     rays, worst_depth, exact, mismatches));
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

void determinism(const std::string& binary) {
  const auto base = fs::temp_directory_path() / "drivesim_acceptance_determinism";
  fs::remove_all(base);
  int codes[2];
  for (int i = 0; i < 2; ++i) {
    const auto out = base / std::to_string(i);
    const auto cmd = fmt::format("{} run --suite suites --agent '*=rule' --seed 7 --out {} --dump-frames {} > {} 2>&1",
                                 binary, out.string(), (out / "frames").string(), (base / "stdout").string());
    fs::create_directories(base);
    codes[i] = std::system(cmd.c_str());
  }
  const auto a = tree(base / "0"), b = tree(base / "1");
  std::size_t logs = 0, frames = 0;
  for (const auto& [k, v] : a) {
    logs += k.rfind("logs/", 0) == 0;
    frames += k.rfind("frames/", 0) == 0;
  }
  const bool same = a == b;
  report("determinism", codes[0] == 0 && codes[1] == 0 && same && logs > 0 && frames > 0 && a.count("report.json"),
         fmt::format("exit codes {}/{}; {} files ({} logs, {} frame files, reports) byte-identical: {}", codes[0],
                     codes[1], a.size(), logs, frames, same));
  fs::remove_all(base);
}

void gap_metric() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  int asym = 0, pow2_mismatch = 0;
  double worst_scaled = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double a = u(rng), b = u(rng);
    const double g = score::gap(a, b);
    asym += g != score::gap(b, a);
    for (double k : {0.25, 0.5, 2.0, 8.0, 1024.0}) pow2_mismatch += score::gap(k * a, k * b) != g;
    const double k = 0.1 + 10 * u(rng);
    const double gk = score::gap(k * a, k * b);
    worst_scaled = std::max(worst_scaled, std::abs(gk - g));
  }
  // Exact value of |0.8 - 1.0| / 1.0 for the double nearest 0.8 (the subtraction is exact).
  const double example = score::gap(0.8, 1.0);
  const bool example_exact = example == 1.0 - 0.8 && score::gap(1.0, 0.8) == example;
  int raised = 0;
  for (auto [a, b] : {std::pair{0.0, 0.5}, {0.5, 0.0}, {-0.1, 0.5}, {0.0, 0.0}}) {
    try {
      score::gap(a, b);
    } catch (const NonPositiveInput&) {
      ++raised;
    }
  }
  report("gap metric", asym == 0 && pow2_mismatch == 0 && example_exact && raised == 4,
         fmt::format("{} asymmetric pairs of 10000; power-of-two scaling mismatches {}; arbitrary scaling within {:.2g} "
                     "(rounding of k*a, k*b); gap(0.8, 1.0) = {:.17g} (exact for the double inputs: {}); NonPositiveInput raised {}/4",
                     asym, pow2_mismatch, worst_scaled, example, example_exact, raised));
}

}  // namespace

int main(int argc, char** argv) {
  const std::string binary = argc > 1 ? argv[1] : "build/tools/drivesim";
  criterion("pdms oracle equivalence", pdms_oracle);
  criterion("open/closed consistency", open_closed_consistency);
  criterion("safety-test discrimination", safety_discrimination);
  criterion("multi-agent lockstep", multi_agent_lockstep);
  criterion("registration recovery", registration_recovery);
  criterion("compositing exactness", compositing_exactness);
  criterion("shading furnace", furnace);
  criterion("sensor consistency", sensor_consistency);
  criterion("determinism", [&] { determinism(binary); });
  criterion("gap metric", gap_metric);
  fmt::print("{} of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
