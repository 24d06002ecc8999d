#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "drivesim/common/error.hpp"
#include "drivesim/registration/kdtree.hpp"
#include "drivesim/registration/registration.hpp"
#include "support/synthetic.hpp"

using namespace drivesim;
using namespace drivesim::reg;

namespace {

PointCloud cloud_of(std::vector<Vec3> pts) {
  PointCloud c;
  c.points = std::move(pts);
  return c;
}

// Predicate oracle, written independently of filter_frame.
bool keep_oracle(const Vec3& p, const FrameAnnotations& ann, double margin) {
  if (p.z() < ann.ground_height + margin) return false;
  for (int k = 0; k < 3; ++k)
    if (p[k] < ann.crop_region.lo[k] || p[k] > ann.crop_region.hi[k]) return false;
  for (const auto& b : ann.dynamic_boxes) {
    auto corners = b.box.corners();
    bool in_xy = true;
    for (int e = 0; e < 4; ++e) {
      Vec2 a = corners[e], c = corners[(e + 1) % 4];
      Vec2 ab = c - a, ap = p.head<2>() - a;
      if (ab.x() * ap.y() - ab.y() * ap.x() < -1e-12) in_xy = false;
    }
    if (in_xy && p.z() >= b.z_min && p.z() <= b.z_max) return false;
  }
  return true;
}

double yaw_error_deg(const geom::Pose& a, const geom::Pose& b) {
  return std::abs(rad2deg(wrap_angle(a.yaw() - b.yaw())));
}

}  // namespace

TEST_CASE("kd-tree nearest matches brute force") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  std::vector<Vec3> pts;
  for (int i = 0; i < 2000; ++i) pts.emplace_back(u(rng), u(rng), std::round(u(rng)));  // ties on z
  for (int i = 0; i < 50; ++i) pts.push_back(pts[i]);  // duplicates
  KdTree tree(pts);
  for (int i = 0; i < 3000; ++i) {
    Vec3 q(u(rng), u(rng), u(rng));
    if (i % 10 == 0) q = pts[i % pts.size()];
    auto a = tree.nearest(q);
    auto b = nearest_brute(pts, q);
    REQUIRE(a.squared_distance == b.squared_distance);
    REQUIRE(a.index == b.index);
  }
}

TEST_CASE("chamfer distance examples") {
  auto p = cloud_of({{0, 0, 0}});
  auto q = cloud_of({{1, 0, 0}});
  CHECK(chamfer_distance(p, q) == 2.0);
  CHECK(chamfer_distance(p, p) == 0.0);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  auto shuffled = pts;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(chamfer_distance(cloud_of(pts), cloud_of(shuffled)) == 0.0);

  CHECK_THROWS_AS(chamfer_distance(PointCloud{}, p), EmptyCloud);
}

TEST_CASE("chamfer distance is symmetric and matches the brute-force form") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3> a, b;
    for (int i = 0; i < 30 + trial * 7; ++i) a.emplace_back(u(rng), u(rng), u(rng));
    for (int i = 0; i < 17 + trial * 3; ++i) b.emplace_back(u(rng), u(rng), u(rng));
    auto pa = cloud_of(a), pb = cloud_of(b);
    double ab = chamfer_distance(pa, pb);
    CHECK(ab == chamfer_distance(pb, pa));
    CHECK(ab == doctest::Approx(chamfer_distance_brute(pa, pb)).epsilon(1e-12));
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("filter_frame") {
  FrameAnnotations ann;
  ann.ground_height = 0.0;
  SUBCASE("above ground with no boxes is unchanged") {
    auto c = cloud_of({{0, 0, 1}, {3, 4, 2}, {-2, 1, 0.3}});
    auto f = filter_frame(c, ann);
    CHECK(f.points == c.points);
  }
  SUBCASE("a point inside a dynamic box is removed") {
    ann.dynamic_boxes.push_back({{Vec2(5, 5), 0.4, Vec2(2, 1)}, 0.0, 2.0});
    auto f = filter_frame(cloud_of({{5, 5, 1}, {0, 0, 1}}), ann);
    REQUIRE(f.size() == 1);
    CHECK(f.points[0] == Vec3(0, 0, 1));
  }
  SUBCASE("mixed cloud: 30 of 100 below the ground margin") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 100; ++i) pts.emplace_back(i * 0.1, 0.0, i < 30 ? 0.29 - 0.01 * i : 0.3 + 0.01 * i);
    auto f = filter_frame(cloud_of(pts), ann);
    std::size_t expected = std::count_if(pts.begin(), pts.end(), [&](auto& p) { return keep_oracle(p, ann, 0.3); });
    CHECK(expected == 70);
    CHECK(f.size() == expected);
  }
  SUBCASE("random clouds agree with the predicate oracle") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-10, 10);
    ann.ground_height = -0.5;
    ann.crop_region.lo = Vec3(-8, -8, -1);
    ann.crop_region.hi = Vec3(8, 9, 4);
    ann.dynamic_boxes.push_back({{Vec2(2, 2), 0.7, Vec2(2.5, 1)}, -1.0, 2.0});
    ann.dynamic_boxes.push_back({{Vec2(-4, 1), -1.2, Vec2(1.5, 3)}, 0.0, 1.0});
    std::vector<Vec3> pts;
    for (int i = 0; i < 5000; ++i) pts.emplace_back(u(rng), u(rng), 0.3 * u(rng));
    auto f = filter_frame(cloud_of(pts), ann);
    std::vector<Vec3> expected;
    for (auto& p : pts)
      if (keep_oracle(p, ann, 0.3)) expected.push_back(p);
    CHECK(f.points == expected);
  }
  SUBCASE("everything filtered") {
    CHECK_THROWS_AS(filter_frame(cloud_of({{0, 0, 0.1}}), ann), EmptyResult);
  }
}

TEST_CASE("register_frame identity") {
  auto scene = testing::structured_scene(500, 1);
  auto r = register_frame(scene, scene, geom::Pose::identity());
  CHECK(r.final_cd == 0.0);
  CHECK(r.corrected.translation.norm() < 1e-6);
  CHECK(std::abs(r.corrected.yaw()) < 1e-6);
  CHECK(r.status == RegistrationStatus::converged);
}

TEST_CASE("register_frame recovers a known perturbation") {
  auto scene = testing::structured_scene(500, 2);
  auto truth = geom::Pose::planar(0.3, 0.2, deg2rad(1.0));
  auto frame = transform(scene, truth.inverse());
  auto r = register_frame(frame, scene, geom::Pose::identity());
  CHECK((r.corrected.translation - truth.translation).norm() < 0.05);
  CHECK(yaw_error_deg(r.corrected, truth) < 0.2);
  CHECK(r.status == RegistrationStatus::converged);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
  CHECK(r.trace.back() == r.final_cd);
}

TEST_CASE("register_frame with coarse init and full SE(3)") {
  auto scene = testing::structured_scene(600, 4);
  auto truth = geom::Pose::from_euler(Vec3(-0.2, 0.25, 0.1), deg2rad(-1.5), deg2rad(0.3), deg2rad(-0.2));
  auto frame = transform(scene, truth.inverse());
  RegistrationOptions opt;
  opt.full_se3 = true;
  auto r = register_frame(frame, scene, geom::Pose::identity(), opt);
  CHECK((r.corrected.translation - truth.translation).norm() < 0.05);
  CHECK(yaw_error_deg(r.corrected, truth) < 0.2);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);

  // Init carries most of the offset; the correction is composed on top.
  auto init = geom::Pose::planar(0.25, 0.2, deg2rad(0.8));
  auto r2 = register_frame(transform(scene, geom::Pose::planar(0.3, 0.2, deg2rad(1.0)).inverse()), scene, init);
  CHECK((r2.corrected.translation - Vec3(0.3, 0.2, 0)).norm() < 0.05);
}

TEST_CASE("register_frame degenerate single points") {
  auto frame = cloud_of({{1, 2, 1}});
  auto ref = cloud_of({{1.37, 1.81, 1}});
  auto r = register_frame(frame, ref, geom::Pose::identity());
  CHECK(r.status == RegistrationStatus::degenerate);
  // Oracle: brute force over a 1 cm translation grid.
  double best = 1e9;
  for (double dx = -0.5; dx <= 0.5; dx += 0.01)
    for (double dy = -0.5; dy <= 0.5; dy += 0.01)
      best = std::min(best, chamfer_distance(transform(frame, geom::Pose::planar(dx, dy, 0)), ref));
  CHECK(r.final_cd <= best + 1e-9);
  CHECK((r.corrected.apply(frame.points[0]) - ref.points[0]).norm() < 1e-3);
}

TEST_CASE("register_frame reports non-convergence") {
  auto scene = testing::structured_scene(300, 6);
  RegistrationOptions opt;
  opt.max_iters = 2;
  auto r = register_frame(transform(scene, geom::Pose::planar(3.0, -2.0, 0.3)), scene, geom::Pose::identity(), opt);
  CHECK(r.status == RegistrationStatus::non_convergence);
  CHECK(r.iterations == 2);
}

TEST_CASE("correct_sequence") {
  auto scene = testing::structured_scene(500, 8);
  SUBCASE("identical frames") {
    std::vector<PointCloud> frames(5, scene);
    auto s = correct_sequence(frames, {});
    CHECK(s.reference_index == 2);
    for (auto& c : s.corrections) {
      CHECK(c.translation.norm() < 1e-6);
      CHECK(std::abs(c.yaw()) < 1e-6);
    }
  }
  SUBCASE("single frame") {
    auto s = correct_sequence({scene}, {});
    REQUIRE(s.corrections.size() == 1);
    CHECK(s.corrections[0].translation.norm() == 0.0);
  }
  SUBCASE("drift of 0.1 m per frame") {
    const int n = 7;
    std::vector<PointCloud> frames;
    for (int i = 0; i < n; ++i) frames.push_back(transform(scene, geom::Pose::planar(0.1 * (i - n / 2), 0, 0)));
    auto s = correct_sequence(frames, {});
    for (int i = 0; i < n; ++i) {
      Vec3 expected(-0.1 * (i - n / 2), 0, 0);
      CHECK((s.corrections[i].translation - expected).norm() < 0.05);
    }
  }
  SUBCASE("errors carry the frame index") {
    std::vector<PointCloud> frames(3, scene);
    std::vector<FrameAnnotations> ann(3);
    ann[2].ground_height = 100.0;
    try {
      correct_sequence(frames, ann);
      FAIL("expected RegistrationError");
    } catch (const RegistrationError& e) {
      CHECK(e.frame() == 2);
    }
    CHECK_THROWS_AS(correct_sequence(frames, {}, 3), ValidationError);
  }
}

TEST_CASE("cloud and annotation files round-trip") {
  auto dir = std::filesystem::temp_directory_path() / "drivesim_test_reg";
  std::filesystem::create_directories(dir);
  auto scene = testing::structured_scene(100, 3);
  write_cloud(dir / "f.bin", scene);
  auto back = read_cloud(dir / "f.bin");
  REQUIRE(back.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK((back.points[i] - scene.points[i]).norm() < 1e-5);
    CHECK(back.intensity[i] == scene.intensity[i]);
  }
  CHECK(std::filesystem::file_size(dir / "f.bin") == 4 + 100 * 16);

  std::vector<FrameAnnotations> ann(2);
  ann[0].ground_height = -0.25;
  ann[0].crop_region = {Vec3(-5, -6, -7), Vec3(5, 6, 7)};
  ann[1].dynamic_boxes.push_back({{Vec2(1, 2), 0.5, Vec2(2, 1)}, -1, 2});
  write_annotations(dir / "a.txt", ann);
  auto ann2 = read_annotations(dir / "a.txt");
  REQUIRE(ann2.size() == 2);
  CHECK(ann2[0].ground_height == -0.25);
  CHECK(ann2[0].crop_region.lo == Vec3(-5, -6, -7));
  REQUIRE(ann2[1].dynamic_boxes.size() == 1);
  CHECK(ann2[1].dynamic_boxes[0].box.heading == 0.5);

  std::ofstream(dir / "bad.txt") << "frame 0\nbox 1 2 3\n";
  CHECK_THROWS_AS(read_annotations(dir / "bad.txt"), ParseError);
  std::ofstream(dir / "bad2.txt") << "frame 0\ncrop 1 1 1 0 0 0\n";
  CHECK_THROWS_AS(read_annotations(dir / "bad2.txt"), ValidationError);
  CHECK_THROWS_AS(read_cloud(dir / "missing.bin"), MissingAsset);
  std::filesystem::remove_all(dir);
}
