#include "drivesim/sensors/render.hpp"

#include <algorithm>
#include <cmath>

#include "drivesim/common/error.hpp"
#include "drivesim/common/hash.hpp"
#include "drivesim/common/rng.hpp"

namespace drivesim::sensors {

namespace {

constexpr std::uint64_t kShadeStream = 0x5348414445ULL;
constexpr std::uint64_t kShadowStream = 0x534841444fULL;

std::uint64_t pixel_stream(std::uint64_t base, std::uint64_t tag, std::uint64_t pixel) {
  return mix64(base ^ mix64(tag ^ mix64(pixel)));
}

struct PixelRay {
  Vec3 origin, dir;
  double depth_scale;  // hit distance -> optical-axis depth
};

PixelRay pixel_ray(const CameraModel& cam, const geom::Pose& cam_world, int u, int v) {
  Vec3 d((u + 0.5 - cam.cx) / cam.fx, (v + 0.5 - cam.cy) / cam.fy, 1.0);
  double inv = 1.0 / d.norm();
  return {cam_world.translation, cam_world.rotate(d * inv), inv};
}

}  // namespace

std::vector<RgbImage> background_views(const StaticWorld& world, const scene::Scenario& sc) {
  std::vector<CameraModel> cams = sc.sensors.cameras;
  if (cams.empty()) {
    CameraModel c;
    c.fx = c.fy = 80.0;
    c.width = 160;
    c.height = 120;
    c.cx = 80.0;
    c.cy = 60.0;
    cams.push_back(c);
  }
  geom::Pose ego = sc.ego.initial_pose();
  ego.translation.z() = sc.background.ground_z;
  std::vector<RgbImage> out;
  for (const auto& c : cams) out.push_back(render_background(world, c, ego).rgb);
  return out;
}

StaticWorld build_static_world(const scene::Scenario& sc) {
  StaticWorld w;
  const auto& bg = sc.background;
  w.sky = bg.sky;
  w.ground_z = bg.ground_z;
  w.background.add_mesh(std::make_shared<geom::TriangleMesh>(geom::make_quad(bg.ground_extent, bg.ground_z, bg.ground_albedo)),
                        geom::Pose::identity(), StaticWorld::kGroundId);
  int id = StaticWorld::kGroundId + 1;
  for (const auto& m : bg.meshes) w.background.add_mesh(m.mesh, geom::Pose::identity(), id++);
  w.background.build();
  w.light = bg.lightmaps ? *bg.lightmaps : relight::fit_lightmaps(background_views(w, sc), bg.sun);
  return w;
}

DynamicWorld::DynamicWorld(const scene::WorldSnapshot& snap) : snapshot(&snap) {
  for (std::size_t i = 0; i < snap.participants.size(); ++i) {
    auto g = std::make_shared<geom::SceneGeometry>();
    g->add_mesh(snap.participants[i].participant->mesh, snap.participants[i].pose, int(i));
    g->build();
    locals.push_back(std::move(g));
  }
}

geom::SceneGeometry DynamicWorld::foreground(int exclude) const {
  geom::SceneGeometry g;
  for (std::size_t i = 0; i < snapshot->participants.size(); ++i)
    if (int(i) != exclude) g.add_mesh(snapshot->participants[i].participant->mesh, snapshot->participants[i].pose, int(i));
  g.build();
  return g;
}

CameraFrame render_background(const StaticWorld& world, const CameraModel& cam, const geom::Pose& ego_pose,
                              Exec exec) {
  cam.validate();
  CameraFrame f{RgbImage(cam.width, cam.height), GrayImage(cam.width, cam.height), GrayImage(cam.width, cam.height)};
  const geom::Pose cw = ego_pose * cam.extrinsic();
#pragma omp parallel for schedule(dynamic, 4) if (exec == Exec::parallel)
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      auto ray = pixel_ray(cam, cw, u, v);
      auto hit = world.background.ray_cast(ray.origin, ray.dir);
      Vec3 c = hit ? hit->albedo : world.sky;
      for (int k = 0; k < 3; ++k) f.rgb(u, v, k) = float(c[k]);
      f.depth(u, v) = hit ? float(hit->distance * ray.depth_scale) : 0.0f;
    }
  }
  return f;
}

CameraFrame render_camera(const StaticWorld& world, const DynamicWorld& dyn, const geom::SceneGeometry& foreground,
                          const CameraModel& cam, const geom::Pose& ego_pose, const RenderOptions& opt) {
  cam.validate();
  const int w = cam.width, h = cam.height;
  RgbImage bg_img(w, h), fg_img(w, h);
  GrayImage mask(w, h), shadow(w, h, 1.0f), depth(w, h);
  const geom::Pose cw = ego_pose * cam.extrinsic();
  const auto& parts = dyn.snapshot->participants;

  // Shadow casters with a conservative reach around each footprint.
  struct Caster {
    int index;
    Vec2 center;
    double reach;
  };
  std::vector<Caster> casters;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (int(i) == opt.observer) continue;
    const auto* p = parts[i].participant;
    casters.push_back({int(i), parts[i].pose.translation.head<2>(), p->half_extents.norm() + 3.0 * p->height});
  }

  // One primary ray through sub-pixel position (x, y). Returns the hit depth
  // along the optical axis, 0 on a miss.
  auto trace = [&](double x, double y, std::uint64_t stream_id, Vec3& bg_c, Vec3& fg_c, bool& is_fg, double& s) {
    Vec3 dopt((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
    const double inv = 1.0 / dopt.norm();
    const Vec3 o = cw.translation, d = cw.rotate(dopt * inv);
    auto bg = world.background.ray_cast(o, d);
    auto fg = foreground.ray_cast(o, d);
    is_fg = fg && (!bg || fg->distance <= bg->distance);
    bg_c = bg ? bg->albedo : world.sky;
    s = 1.0;
    if (is_fg) {
      const auto* p = parts[fg->mesh_id].participant;
      relight::Material mat = p->material;
      mat.albedo = fg->albedo;
      Vec3 n = fg->normal.dot(d) > 0 ? Vec3(-fg->normal) : fg->normal;
      relight::ShadeContext ctx{opt.seed, pixel_stream(opt.stream, kShadeStream, stream_id),
                                dyn.locals[fg->mesh_id].get()};
      fg_c = relight::shade_foreground(fg->point, n, -d, mat, world.light, opt.shade_samples, ctx);
      return fg->distance * inv;
    }
    if (!bg) return 0.0;
    if (bg->mesh_id == StaticWorld::kGroundId) {
      for (const auto& c : casters) {
        if ((bg->point.head<2>() - c.center).norm() > c.reach) continue;
        s *= relight::shadow_intensity(bg->point, Vec3::UnitZ(), dyn.locals[c.index].get(), world.light,
                                       opt.shadow_samples, opt.seed,
                                       pixel_stream(opt.stream, kShadowStream ^ std::uint64_t(c.index), stream_id))
                 .value;
      }
    }
    return bg->distance * inv;
  };

#pragma omp parallel for schedule(dynamic, 4) if (opt.exec == Exec::parallel)
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::uint64_t pixel = std::uint64_t(v) * w + u;
      Vec3 bg_c, fg_c;
      bool is_fg;
      double s;
      if (!opt.supersample) {
        depth(u, v) = float(trace(u + 0.5, v + 0.5, pixel, bg_c, fg_c, is_fg, s));
        for (int k = 0; k < 3; ++k) bg_img(u, v, k) = float(bg_c[k]);
        if (is_fg) {
          for (int k = 0; k < 3; ++k) fg_img(u, v, k) = float(fg_c[k]);
          mask(u, v) = 1.0f;
        } else {
          shadow(u, v) = float(s);
        }
        continue;
      }
      // Fractional mask; background and shadow averaged over the uncovered
      // sub-rays, foreground over the covered ones.
      Vec3 bg_sum = Vec3::Zero(), fg_sum = Vec3::Zero(), bg_all = Vec3::Zero();
      double s_sum = 0.0;
      int n_fg = 0;
      for (int sub = 0; sub < 4; ++sub) {
        const double x = u + 0.25 + 0.5 * (sub & 1), y = v + 0.25 + 0.5 * (sub >> 1);
        trace(x, y, pixel * 4 + sub, bg_c, fg_c, is_fg, s);
        bg_all += bg_c;
        if (is_fg) {
          fg_sum += fg_c;
          ++n_fg;
        } else {
          bg_sum += bg_c;
          s_sum += s;
        }
      }
      const Vec3 bgv = n_fg < 4 ? Vec3(bg_sum / (4 - n_fg)) : Vec3(bg_all / 4.0);
      for (int k = 0; k < 3; ++k) {
        bg_img(u, v, k) = float(bgv[k]);
        if (n_fg) fg_img(u, v, k) = float(fg_sum[k] / n_fg);
      }
      mask(u, v) = float(n_fg / 4.0);
      shadow(u, v) = n_fg < 4 ? float(s_sum / (4 - n_fg)) : 1.0f;
      depth(u, v) = float(trace(u + 0.5, v + 0.5, pixel * 4 + 4, bg_c, fg_c, is_fg, s));
    }
  }
  CameraFrame f;
  f.rgb = apply_exposure(relight::composite(bg_img, fg_img, mask, shadow), cam.exposure_A, cam.exposure_t);
  f.depth = std::move(depth);
  f.mask = std::move(mask);
  return f;
}

RangeImage render_lidar(const StaticWorld& world, const geom::SceneGeometry& foreground, const LidarModel& lidar,
                        const geom::Pose& ego_pose, Exec exec) {
  lidar.validate();
  RangeImage r{GrayImage(lidar.azimuths, lidar.channels), GrayImage(lidar.azimuths, lidar.channels)};
  const geom::Pose sw = ego_pose * lidar.extrinsic();
#pragma omp parallel for schedule(dynamic, 1) if (exec == Exec::parallel)
  for (int ch = 0; ch < lidar.channels; ++ch) {
    for (int col = 0; col < lidar.azimuths; ++col) {
      const Vec3 d = sw.rotate(lidar.direction(ch, col));
      auto bg = world.background.ray_cast(sw.translation, d, lidar.max_range);
      auto fg = foreground.ray_cast(sw.translation, d, lidar.max_range);
      const geom::Hit* hit = nullptr;
      if (bg) hit = &*bg;
      if (fg && (!hit || fg->distance <= hit->distance)) hit = &*fg;
      if (!hit) continue;
      r.depth(col, ch) = float(hit->distance);
      r.intensity(col, ch) = float(luminance(hit->albedo) / (1.0 + hit->distance / lidar.max_range));
    }
  }
  return r;
}

reg::PointCloud range_image_points(const RangeImage& range, const LidarModel& lidar, const geom::Pose& sensor_pose) {
  reg::PointCloud pc;
  for (int ch = 0; ch < range.depth.height; ++ch)
    for (int col = 0; col < range.depth.width; ++col) {
      float d = range.depth(col, ch);
      if (d <= 0.0f) continue;
      pc.points.push_back(sensor_pose.apply(lidar.direction(ch, col) * double(d)));
      pc.intensity.push_back(range.intensity(col, ch));
    }
  return pc;
}

RangeImage reproject_merged(const reg::PointCloud& points, const geom::Pose& sensor_pose, const LidarModel& lidar) {
  lidar.validate();
  RangeImage r{GrayImage(lidar.azimuths, lidar.channels), GrayImage(lidar.azimuths, lidar.channels)};
  const geom::Pose inv = sensor_pose.inverse();
  const double spacing =
      lidar.channels > 1 ? (lidar.vfov_max - lidar.vfov_min) / (lidar.channels - 1) : std::max(lidar.vfov_max - lidar.vfov_min, deg2rad(1.0));
  const double az_step = 2.0 * kPi / lidar.azimuths;
  const bool has_intensity = points.intensity.size() == points.points.size();
  for (std::size_t i = 0; i < points.points.size(); ++i) {
    const Vec3 q = inv.apply(points.points[i]);
    const double range = q.norm();
    if (!(range > 0) || float(range) > float(lidar.max_range)) continue;
    const double el = std::asin(std::clamp(q.z() / range, -1.0, 1.0));
    double az = std::atan2(q.y(), q.x());
    if (az < 0) az += 2.0 * kPi;
    const double ch_f = lidar.channels > 1 ? (lidar.vfov_max - el) / spacing : (lidar.elevation(0) - el) / spacing;
    const long ch = std::lround(ch_f);
    if (ch < 0 || ch >= lidar.channels || std::abs(ch_f - double(ch)) > 0.5) continue;
    const long col = std::lround(az / az_step) % lidar.azimuths;
    float& cell = r.depth(int(col), int(ch));
    const float d = float(range);
    if (cell == 0.0f || d < cell) {
      cell = d;
      r.intensity(int(col), int(ch)) = has_intensity ? points.intensity[i] : 0.0f;
    }
  }
  return r;
}

BevHistogram bev_histogram(const std::vector<Vec3>& points, const BevGrid& grid, double ground_z) {
  grid.validate();
  BevHistogram h;
  h.cells = grid.cells;
  h.extent = grid.extent;
  h.counts.assign(std::size_t(grid.cells) * grid.cells * 2, 0.0f);
  const double cell = grid.cell_size();
  for (const auto& p : points) {
    const double fx = std::floor((p.x() + grid.extent) / cell), fy = std::floor((p.y() + grid.extent) / cell);
    if (fx < 0 || fy < 0 || fx >= grid.cells || fy >= grid.cells) continue;
    const int bin = p.z() <= ground_z + grid.split_height ? 0 : 1;
    float& c = h.counts[(std::size_t(fx) * grid.cells + std::size_t(fy)) * 2 + bin];
    c = std::min(float(grid.clip_max), c + 1.0f);
  }
  return h;
}

RgbImage apply_exposure(const RgbImage& img, const Mat3& A, const Vec3& t) {
  RgbImage out(img.width, img.height);
  const std::size_t n = std::size_t(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 c(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]);
    const Vec3 r = A * c + t;
    for (int k = 0; k < 3; ++k) out.data[3 * i + k] = float(std::clamp(r[k], 0.0, 1.0));
  }
  return out;
}

std::string SensorFrame::digest() const {
  Fnv1a h;
  for (const auto& c : cameras) {
    h.update(std::span<const float>(c.rgb.data));
    h.update(std::span<const float>(c.depth.data));
    h.update(std::span<const float>(c.mask.data));
  }
  h.update(std::span<const float>(lidar.depth.data));
  h.update(std::span<const float>(lidar.intensity.data));
  h.update(std::span<const float>(bev.counts));
  return h.hex();
}

SensorFrame render_frame(const StaticWorld& world, const DynamicWorld& dyn, int observer, const SensorRig& rig,
                         const RenderOptions& opt, bool render_cameras) {
  const geom::Pose ego = dyn.snapshot->participants.at(observer).pose;
  const geom::SceneGeometry fg = dyn.foreground(observer);
  SensorFrame f;
  if (render_cameras) {
    for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
      RenderOptions o = opt;
      o.observer = observer;
      o.stream = mix64(opt.stream ^ (0x43414dULL + i));
      f.cameras.push_back(render_camera(world, dyn, fg, rig.cameras[i], ego, o));
    }
  }
  f.lidar = render_lidar(world, fg, rig.lidar, ego, opt.exec);
  f.points = range_image_points(f.lidar, rig.lidar, rig.lidar.extrinsic()).points;
  f.bev = bev_histogram(f.points, rig.bev, 0.0);
  return f;
}

void dump_frame(const SensorFrame& frame, const std::string& prefix) {
  for (std::size_t i = 0; i < frame.cameras.size(); ++i) {
    const std::string p = prefix + "cam" + std::to_string(i);
    write_ppm(p + "_rgb.ppm", frame.cameras[i].rgb);
    write_pfm(p + "_depth.pfm", frame.cameras[i].depth);
    write_pfm(p + "_mask.pfm", frame.cameras[i].mask);
  }
  write_pfm(prefix + "lidar_depth.pfm", frame.lidar.depth);
  write_pfm(prefix + "lidar_intensity.pfm", frame.lidar.intensity);
}

}  // namespace drivesim::sensors
