#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "drivesim/common/error.hpp"
#include "drivesim/geom/box2d.hpp"
#include "drivesim/geom/bvh.hpp"
#include "drivesim/geom/polygon.hpp"

using namespace drivesim;
using namespace drivesim::geom;

namespace {

Pose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Pose::from_euler(Vec3(5 * u(rng), 5 * u(rng), 5 * u(rng)), 3 * u(rng), 1.5 * u(rng), 3 * u(rng));
}

// Dense grid oracle over the overlap of the two axis-aligned bounds.
bool sampled_overlap(const OrientedBox2D& a, const OrientedBox2D& b, double h) {
  Polygon2D pa, pb;
  for (auto c : a.corners()) pa.ring.push_back(c);
  for (auto c : b.corners()) pb.ring.push_back(c);
  Vec2 lo = Vec2::Constant(1e9), hi = Vec2::Constant(-1e9), lo_b = lo, hi_b = hi;
  for (auto& c : pa.ring) lo = lo.cwiseMin(c), hi = hi.cwiseMax(c);
  for (auto& c : pb.ring) lo_b = lo_b.cwiseMin(c), hi_b = hi_b.cwiseMax(c);
  lo = lo.cwiseMax(lo_b);
  hi = hi.cwiseMin(hi_b);
  for (double x = lo.x() + h / 2; x < hi.x(); x += h)
    for (double y = lo.y() + h / 2; y < hi.y(); y += h)
      if (pa.contains({x, y}, 0.0) && pb.contains({x, y}, 0.0)) return true;
  return false;
}

}  // namespace

TEST_CASE("pose invariants") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    CHECK(a.is_valid());
    const Pose ab_c = (a * b) * c, a_bc = a * (b * c);
    CHECK((ab_c.rotation - a_bc.rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ab_c.translation - a_bc.translation).cwiseAbs().maxCoeff() < 1e-12);
    const Pose lhs = (a * b).inverse(), rhs = b.inverse() * a.inverse();
    CHECK((lhs.rotation - rhs.rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((lhs.translation - rhs.translation).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(Pose::planar(1, 2, 0.7).yaw() == doctest::Approx(0.7));
}

TEST_CASE("ray_cast against a plane and a sphere") {
  SceneGeometry scene;
  scene.add_mesh(std::make_shared<TriangleMesh>(make_quad(100.0, 5.0, Vec3(0.5, 0.5, 0.5))), Pose::identity());
  scene.build();
  auto hit = scene.ray_cast(Vec3::Zero(), Vec3::UnitZ());
  REQUIRE(hit);
  CHECK(hit->distance == doctest::Approx(5.0).epsilon(1e-12));
  CHECK_FALSE(scene.ray_cast(Vec3::Zero(), -Vec3::UnitZ()));

  SceneGeometry spheres;
  spheres.add_sphere(Vec3(0, 0, 10), 1.0, Vec3::Ones());
  spheres.build();
  hit = spheres.ray_cast(Vec3::Zero(), Vec3::UnitZ());
  REQUIRE(hit);
  CHECK(std::abs(hit->distance - 9.0) < 1e-12);
  CHECK(hit->normal.z() == doctest::Approx(-1.0));
}

TEST_CASE("ray_cast distance matches analytic plane and sphere intersections") {
  SceneGeometry scene;
  const double plane_z = 3.0;
  scene.add_mesh(std::make_shared<TriangleMesh>(make_quad(1000.0, plane_z, Vec3::Ones())), Pose::identity());
  const Vec3 c(0.5, -0.3, 8.0);
  const double r = 2.0;
  scene.add_sphere(c, r, Vec3::Ones());
  scene.build();
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    Vec3 d(n01(rng), n01(rng), n01(rng));
    d.normalize();
    const Vec3 o(0.2 * n01(rng), 0.2 * n01(rng), 0.0);
    // Analytic oracle: nearest of plane and sphere roots.
    double expect = SceneGeometry::kInf;
    if (d.z() > 0) {
      const double tp = (plane_z - o.z()) / d.z();
      const Vec3 p = o + tp * d;
      if (std::abs(p.x()) <= 1000 && std::abs(p.y()) <= 1000) expect = tp;
    }
    const Vec3 oc = o - c;
    const double b = oc.dot(d), disc = b * b - (oc.squaredNorm() - r * r);
    if (disc >= 0 && -b - std::sqrt(disc) > 0) expect = std::min(expect, -b - std::sqrt(disc));
    const auto hit = scene.ray_cast(o, d);
    if (expect == SceneGeometry::kInf) {
      CHECK_FALSE(hit);
    } else {
      REQUIRE(hit);
      CHECK(std::abs(hit->distance - expect) < 1e-6);
      ++checked;
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("bvh agrees with the linear scan on a triangle soup") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  auto soup = std::make_shared<TriangleMesh>();
  for (int i = 0; i < 600; ++i) {
    const Vec3 base(u(rng), u(rng), u(rng));
    for (int k = 0; k < 3; ++k) soup->vertices.push_back(base + 0.1 * Vec3(u(rng), u(rng), u(rng)));
    const auto b = static_cast<std::uint32_t>(3 * i);
    soup->faces.push_back({b, b + 1, b + 2});
  }
  soup->compute_normals();
  soup->albedo = {Vec3::Constant(0.3)};
  SceneGeometry scene;
  scene.add_mesh(soup, Pose::planar(1, 2, 0.3));
  scene.add_sphere(Vec3(0, 0, 0), 1.5, Vec3::Ones());
  scene.build();
  CHECK(scene.node_count() > 1);
  std::normal_distribution<double> n01;
  int hits = 0;
  for (int i = 0; i < 3000; ++i) {
    const Vec3 o(u(rng), u(rng), u(rng));
    const Vec3 d = Vec3(n01(rng), n01(rng), n01(rng)).normalized();
    const auto a = scene.ray_cast(o, d);
    const auto b = scene.ray_cast_brute(o, d);
    REQUIRE(a.has_value() == b.has_value());
    if (a) {
      CHECK(a->distance == b->distance);
      CHECK(scene.occluded(o, d, a->distance));
      CHECK_FALSE(scene.occluded(o, d, a->distance * 0.999));
      ++hits;
    }
  }
  CHECK(hits > 100);
}

TEST_CASE("boxes_overlap named cases") {
  const OrientedBox2D unit{Vec2(0, 0), 0.0, Vec2(0.5, 0.5)};
  CHECK(boxes_overlap(unit, unit));
  CHECK_FALSE(boxes_overlap(unit, OrientedBox2D{Vec2(3, 0), 0.0, Vec2(0.5, 0.5)}));
  const OrientedBox2D rotated{Vec2(0.9, 0), kPi / 4, Vec2(0.5, 0.5)};
  CHECK(sampled_overlap(unit, rotated, 1e-3));
  CHECK(boxes_overlap(unit, rotated));
  // Edge contact has zero area.
  CHECK_FALSE(boxes_overlap(unit, OrientedBox2D{Vec2(1.0, 0), 0.0, Vec2(0.5, 0.5)}));
}

TEST_CASE("SAT agrees with a dense sampling oracle on random pairs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-2.5, 2.5), ext(0.2, 1.5), ang(-kPi, kPi);
  int disagreements = 0, overlaps = 0;
  for (int i = 0; i < 1000; ++i) {
    const OrientedBox2D a{Vec2(pos(rng), pos(rng)), ang(rng), Vec2(ext(rng), ext(rng))};
    const OrientedBox2D b{Vec2(pos(rng), pos(rng)), ang(rng), Vec2(ext(rng), ext(rng))};
    const bool sat = boxes_overlap(a, b);
    const bool sampled = sampled_overlap(a, b, 4e-3);
    overlaps += sat;
    if (sat != sampled && intersection_area(a, b) > 1e-4) ++disagreements;
  }
  CHECK(disagreements == 0);
  CHECK(overlaps > 100);
}

TEST_CASE("oriented_iou") {
  const OrientedBox2D a{Vec2(1, 0.5), 0.0, Vec2(1, 0.5)};
  const OrientedBox2D b{Vec2(2, 0.5), 0.0, Vec2(1, 0.5)};
  CHECK(oriented_iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(oriented_iou(a, OrientedBox2D{Vec2(10, 0), 0.3, Vec2(1, 1)}) == 0.0);

  // Rasterization oracle at 1e-3 cells over [0,3]x[0,1].
  const double h = 1e-3;
  long in_a = 0, in_b = 0, in_both = 0;
  for (int i = 0; i < 3000; ++i)
    for (int j = 0; j < 1000; ++j) {
      const double x = (i + 0.5) * h, y = (j + 0.5) * h;
      const bool pa = x <= 2.0 && y <= 1.0, pb = x >= 1.0 && y <= 1.0;
      in_a += pa;
      in_b += pb;
      in_both += pa && pb;
    }
  const double raster = double(in_both) / double(in_a + in_b - in_both);
  CHECK(std::abs(raster - 1.0 / 3.0) < 1e-3);
  CHECK(oriented_iou(a, b) == doctest::Approx(raster).epsilon(1e-3));
  CHECK(oriented_iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("oriented_iou is symmetric and rigid-motion invariant") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-2, 2), ext(0.3, 2), ang(-kPi, kPi);
  for (int i = 0; i < 500; ++i) {
    OrientedBox2D a{Vec2(pos(rng), pos(rng)), ang(rng), Vec2(ext(rng), ext(rng))};
    OrientedBox2D b{Vec2(pos(rng), pos(rng)), ang(rng), Vec2(ext(rng), ext(rng))};
    const double iou = oriented_iou(a, b);
    CHECK(std::abs(iou - oriented_iou(b, a)) < 1e-9);
    const double rot = ang(rng);
    const Vec2 shift(10 * pos(rng), 10 * pos(rng));
    const Eigen::Rotation2Dd R(rot);
    for (auto* box : {&a, &b}) {
      box->center = R * box->center + shift;
      box->heading += rot;
    }
    CHECK(std::abs(iou - oriented_iou(a, b)) < 1e-9);
  }
}

TEST_CASE("footprint_in_polygon") {
  Polygon2D square{{{-10, -10}, {10, -10}, {10, 10}, {-10, 10}}};
  square.validate();
  CHECK(footprint_in_polygon(OrientedBox2D{Vec2(0, 0), 0.3, Vec2(2, 1)}, square));
  CHECK_FALSE(footprint_in_polygon(OrientedBox2D{Vec2(20, 0), 0.0, Vec2(1, 1)}, square));
  const OrientedBox2D straddle{Vec2(9.5, 9.0), 0.0, Vec2(1, 0.5)};
  int corners_out = 0;
  for (auto c : straddle.corners()) corners_out += !(std::abs(c.x()) <= 10 && std::abs(c.y()) <= 10);
  CHECK(corners_out == 2);
  CHECK_FALSE(footprint_in_polygon(straddle, square));
  // Touching the boundary counts as inside.
  CHECK(footprint_in_polygon(OrientedBox2D{Vec2(9, 0), 0.0, Vec2(1, 1)}, square));

  Polygon2D bow{{{0, 0}, {1, 1}, {1, 0}, {0, 1}}};
  CHECK_THROWS_AS(bow.validate(), ValidationError);
  Polygon2D two{{Vec2(0, 0), Vec2(1, 1)}};
  CHECK_THROWS_AS(two.validate(), ValidationError);
}

TEST_CASE("polyline projection") {
  Polyline line{{{0, 0}, {10, 0}, {10, 10}}};
  CHECK(line.length() == doctest::Approx(20));
  CHECK(line.project(Vec2(5, 3)) == doctest::Approx(5));
  CHECK(line.project(Vec2(12, 4)) == doctest::Approx(14));
  CHECK(line.point_at(15).y() == doctest::Approx(5));
  CHECK(line.heading_at(15) == doctest::Approx(kPi / 2));
  const auto band = buffer_polyline(line, 2.0);
  band.validate();
  CHECK(band.contains(Vec2(5, 1.9)));
  CHECK_FALSE(band.contains(Vec2(5, 2.1)));
}

TEST_CASE("mesh file round trip and errors") {
  const auto dir = std::filesystem::temp_directory_path() / "drivesim_mesh_test";
  std::filesystem::create_directories(dir);
  const auto mesh = make_vehicle(4.6, 1.9, 1.5, Vec3(0.8, 0.1, 0.1));
  save_mesh(dir / "car.mesh", mesh);
  const auto loaded = load_mesh(dir / "car.mesh");
  CHECK(loaded.vertices == mesh.vertices);
  CHECK(loaded.faces == mesh.faces);
  CHECK(loaded.albedo == mesh.albedo);
  for (std::size_t i = 0; i < mesh.normals.size(); ++i) CHECK((loaded.normals[i] - mesh.normals[i]).norm() < 1e-12);

  {
    std::FILE* f = std::fopen((dir / "bad.mesh").c_str(), "w");
    std::fputs("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_mesh(dir / "bad.mesh"), ValidationError);
  {
    std::FILE* f = std::fopen((dir / "bad2.mesh").c_str(), "w");
    std::fputs("v 0 0\n", f);
    std::fclose(f);
  }
  try {
    load_mesh(dir / "bad2.mesh");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
  CHECK_THROWS_AS(load_mesh(dir / "nope.mesh"), MissingAsset);
}
