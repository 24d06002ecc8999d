#include <benchmark/benchmark.h>

#include "drivesim/registration/registration.hpp"
#include "drivesim/scene/suite.hpp"
#include "drivesim/sensors/render.hpp"

using namespace drivesim;

namespace {

struct Fixture {
  scene::Scenario sc = scene::stationary_blocker_scenario();
  sensors::StaticWorld world = sensors::build_static_world(sc);
  std::map<std::string, control::EgoState> states{{"ego", {0.0, 0.0, 0.0, 0.0, 10.0, 0.0, 0.0}}};
  scene::TriggerTimes triggers;
  scene::WorldSnapshot snap = scene::compose(sc, 0.0, states, triggers);
  sensors::DynamicWorld dyn{snap};
  geom::SceneGeometry fg = dyn.foreground(0);

  static Fixture& get() {
    static Fixture f;
    return f;
  }
};

sensors::CameraModel bench_camera() {
  sensors::CameraModel cam;
  cam.width = 160;
  cam.height = 120;
  cam.fx = cam.fy = 100.0;
  cam.cx = 80.0;
  cam.cy = 60.0;
  cam.mount.position = Vec3(1.5, 0.0, 1.5);
  return cam;
}

void BM_RenderCamera(benchmark::State& state) {
  auto& f = Fixture::get();
  sensors::RenderOptions opt;
  opt.exec = state.range(0) ? Exec::parallel : Exec::serial;
  opt.shade_samples = 8;
  opt.shadow_samples = 8;
  const auto cam = bench_camera();
  for (auto _ : state)
    benchmark::DoNotOptimize(sensors::render_camera(f.world, f.dyn, f.fg, cam, f.snap.participants[0].pose, opt));
  state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_RenderCamera)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RenderLidar(benchmark::State& state) {
  auto& f = Fixture::get();
  const auto exec = state.range(0) ? Exec::parallel : Exec::serial;
  for (auto _ : state)
    benchmark::DoNotOptimize(sensors::render_lidar(f.world, f.fg, f.sc.sensors.lidar, f.snap.participants[0].pose, exec));
  state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_RenderLidar)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RayCast(benchmark::State& state) {
  auto& f = Fixture::get();
  const auto& lidar = f.sc.sensors.lidar;
  const Vec3 origin(0.0, 0.0, 1.8);
  const bool bvh = state.range(0) != 0;
  for (auto _ : state)
    for (int col = 0; col < lidar.azimuths; col += 4) {
      const Vec3 d = lidar.direction(lidar.channels / 2, col);
      benchmark::DoNotOptimize(bvh ? f.world.background.ray_cast(origin, d) : f.world.background.ray_cast_brute(origin, d));
    }
  state.SetLabel(bvh ? "bvh" : "linear scan");
}
BENCHMARK(BM_RayCast)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_Chamfer(benchmark::State& state) {
  const auto scene = [] {
    reg::PointCloud c;
    for (int i = 0; i < 2000; ++i) c.points.emplace_back(std::cos(i * 0.37) * (5 + i % 17), std::sin(i * 0.53) * (3 + i % 11), 0.5 + i % 7 * 0.3);
    return c;
  }();
  const auto moved = reg::transform(scene, geom::Pose::planar(0.2, -0.1, 0.01));
  const bool tree = state.range(0) != 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(tree ? reg::chamfer_distance(scene, moved) : reg::chamfer_distance_brute(scene, moved));
  state.SetLabel(tree ? "kd-tree" : "brute force");
}
BENCHMARK(BM_Chamfer)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
