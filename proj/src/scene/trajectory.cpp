#include "drivesim/scene/trajectory.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "drivesim/common/error.hpp"

namespace drivesim::scene {

namespace {

TrajectorySample lerp(const TrajectorySample& a, const TrajectorySample& b, double t) {
  double alpha = (t - a.t) / (b.t - a.t);
  TrajectorySample s;
  s.t = t;
  s.x = a.x + alpha * (b.x - a.x);
  s.y = a.y + alpha * (b.y - a.y);
  s.heading = wrap_angle(a.heading + alpha * wrap_angle(b.heading - a.heading));
  s.v = a.v + alpha * (b.v - a.v);
  return s;
}

}  // namespace

void Trajectory::validate(std::size_t min_samples) const {
  if (samples.empty()) throw EmptyTrajectory("trajectory has no samples");
  if (samples.size() < min_samples)
    throw ValidationError("trajectory needs at least " + std::to_string(min_samples) + " samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.t) || !std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.heading) ||
        !std::isfinite(s.v))
      throw ValidationError("trajectory sample " + std::to_string(i) + " is not finite");
    if (i > 0 && !(s.t > samples[i - 1].t))
      throw ValidationError("trajectory times not strictly increasing at sample " + std::to_string(i));
  }
}

TrajectorySample sample(const Trajectory& traj, double t) {
  if (traj.empty()) throw EmptyTrajectory("cannot sample an empty trajectory");
  const auto& s = traj.samples;
  if (t <= s.front().t) return {t, s.front().x, s.front().y, s.front().heading, s.front().v};
  if (t >= s.back().t) return {t, s.back().x, s.back().y, s.back().heading, s.back().v};
  auto it = std::upper_bound(s.begin(), s.end(), t, [](double v, const TrajectorySample& x) { return v < x.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  if (t == a.t) return a;
  return lerp(a, b, t);
}

std::pair<geom::Pose, double> sample_pose(const Trajectory& traj, double t) {
  auto s = sample(traj, t);
  return {geom::Pose::planar(s.x, s.y, s.heading), s.v};
}

TrajectorySample sample_extrapolate_front(const Trajectory& traj, double t) {
  if (traj.size() >= 2 && t < traj.front().t) return lerp(traj.samples[0], traj.samples[1], t);
  return sample(traj, t);
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingAsset(path.string());
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(path.string(), 1, "header", "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,x,y,heading,v") throw ParseError(path.string(), 1, "header", "expected 't,x,y,heading,v'");
  Trajectory traj;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    TrajectorySample s;
    double* fields[] = {&s.t, &s.x, &s.y, &s.heading, &s.v};
    const char* names[] = {"t", "x", "y", "heading", "v"};
    for (int k = 0; k < 5; ++k) {
      std::string cell;
      if (!std::getline(ss, cell, ',')) throw ParseError(path.string(), lineno, names[k], "missing column");
      try {
        std::size_t used = 0;
        *fields[k] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(path.string(), lineno, names[k], "not a number: '" + cell + "'");
      }
    }
    std::string extra;
    if (std::getline(ss, extra)) throw ParseError(path.string(), lineno, "", "too many columns");
    traj.samples.push_back(s);
  }
  try {
    traj.validate(1);
  } catch (const Error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return traj;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw IoError("cannot write " + path.string());
  std::fputs("t,x,y,heading,v\n", f);
  for (const auto& s : traj.samples) std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.x, s.y, s.heading, s.v);
  if (std::fclose(f) != 0) throw IoError("short write to " + path.string());
}

}  // namespace drivesim::scene
