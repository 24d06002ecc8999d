#include "drivesim/registration/point_cloud.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "drivesim/common/error.hpp"

namespace drivesim::reg {

static_assert(std::endian::native == std::endian::little, "cloud I/O assumes a little-endian host");

void PointCloud::validate() const {
  if (points.empty()) throw EmptyCloud("point cloud '" + frame_id + "' is empty");
  if (!intensity.empty() && intensity.size() != points.size())
    throw ValidationError("point cloud '" + frame_id + "': intensity count differs from point count");
  for (const auto& p : points)
    if (!p.allFinite()) throw ValidationError("point cloud '" + frame_id + "': non-finite coordinate");
}

PointCloud transform(const PointCloud& cloud, const geom::Pose& pose) {
  PointCloud out = cloud;
  for (auto& p : out.points) p = pose.apply(p);
  return out;
}

PointCloud read_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingAsset(path.string());
  std::uint32_t n = 0;
  if (!in.read(reinterpret_cast<char*>(&n), 4)) throw IoError(path.string() + ": truncated header");
  std::vector<float> raw(std::size_t(n) * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size() * sizeof(float))))
    throw IoError(path.string() + ": truncated point data");
  PointCloud cloud;
  cloud.frame_id = path.stem().string();
  cloud.points.reserve(n);
  cloud.intensity.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cloud.points.emplace_back(raw[4 * i], raw[4 * i + 1], raw[4 * i + 2]);
    cloud.intensity.push_back(raw[4 * i + 3]);
  }
  return cloud;
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  auto n = static_cast<std::uint32_t>(cloud.points.size());
  out.write(reinterpret_cast<const char*>(&n), 4);
  for (std::size_t i = 0; i < n; ++i) {
    float rec[4] = {float(cloud.points[i].x()), float(cloud.points[i].y()), float(cloud.points[i].z()),
                    cloud.intensity.empty() ? 0.0f : cloud.intensity[i]};
    out.write(reinterpret_cast<const char*>(rec), sizeof rec);
  }
  if (!out) throw IoError("short write to " + path.string());
}

void FrameAnnotations::validate() const {
  if (!((crop_region.hi.array() > crop_region.lo.array()).all()))
    throw ValidationError("crop region is degenerate");
  for (const auto& b : dynamic_boxes)
    if (b.box.half_extents.minCoeff() <= 0 || b.z_max < b.z_min) throw ValidationError("dynamic box is degenerate");
}

std::vector<FrameAnnotations> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingAsset(path.string());
  std::vector<FrameAnnotations> frames;
  Aabb3 default_crop;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& field, const std::string& what) {
    throw ParseError(path.string(), lineno, field, what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    if (key == "frame") {
      std::size_t idx;
      if (!(ss >> idx)) fail("frame", "expected index");
      if (idx != frames.size()) fail("frame", "frames must be listed in order starting at 0");
      frames.emplace_back().crop_region = default_crop;
    } else if (key == "crop") {
      Aabb3 box;
      if (!(ss >> box.lo.x() >> box.lo.y() >> box.lo.z() >> box.hi.x() >> box.hi.y() >> box.hi.z()))
        fail("crop", "expected 6 numbers");
      (frames.empty() ? default_crop : frames.back().crop_region) = box;
    } else if (key == "ground") {
      if (frames.empty()) fail("ground", "outside a frame");
      if (!(ss >> frames.back().ground_height)) fail("ground", "expected a number");
    } else if (key == "box") {
      if (frames.empty()) fail("box", "outside a frame");
      FrameAnnotations::DynamicBox b;
      if (!(ss >> b.box.center.x() >> b.box.center.y() >> b.box.heading >> b.box.half_extents.x() >>
            b.box.half_extents.y() >> b.z_min >> b.z_max))
        fail("box", "expected 7 numbers");
      frames.back().dynamic_boxes.push_back(b);
    } else {
      fail(key, "unknown record");
    }
    std::string extra;
    if (ss >> extra) fail(key, "trailing tokens");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    try {
      frames[i].validate();
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + " frame " + std::to_string(i) + ": " + e.what());
    }
  }
  return frames;
}

void write_annotations(const std::filesystem::path& path, const std::vector<FrameAnnotations>& frames) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    out << "frame " << i << "\nground " << f.ground_height << "\ncrop " << f.crop_region.lo.x() << ' '
        << f.crop_region.lo.y() << ' ' << f.crop_region.lo.z() << ' ' << f.crop_region.hi.x() << ' '
        << f.crop_region.hi.y() << ' ' << f.crop_region.hi.z() << '\n';
    for (const auto& b : f.dynamic_boxes)
      out << "box " << b.box.center.x() << ' ' << b.box.center.y() << ' ' << b.box.heading << ' '
          << b.box.half_extents.x() << ' ' << b.box.half_extents.y() << ' ' << b.z_min << ' ' << b.z_max << '\n';
  }
}

}  // namespace drivesim::reg
