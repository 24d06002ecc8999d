#include "drivesim/scene/scenario.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <set>
#include <sstream>

#include "drivesim/common/error.hpp"

namespace drivesim::scene {

namespace pt = boost::property_tree;

const char* to_string(SimMode m) {
  switch (m) {
    case SimMode::non_reactive: return "non_reactive";
    case SimMode::safety_test: return "safety_test";
    case SimMode::multi_agent: return "multi_agent";
  }
  return "?";
}

const char* to_string(Command c) {
  switch (c) {
    case Command::left: return "left";
    case Command::right: return "right";
    case Command::straight: return "straight";
    case Command::unknown: return "unknown";
  }
  return "?";
}

const char* to_string(BehaviorKind k) {
  switch (k) {
    case BehaviorKind::stationary: return "stationary";
    case BehaviorKind::sudden_brake: return "sudden_brake";
    case BehaviorKind::intersection_cross: return "intersection_cross";
    case BehaviorKind::cut_in: return "cut_in";
  }
  return "?";
}

SimMode parse_mode(const std::string& s) {
  for (auto m : {SimMode::non_reactive, SimMode::safety_test, SimMode::multi_agent})
    if (s == to_string(m)) return m;
  throw ValidationError("unknown simulation mode '" + s + "'");
}

Command parse_command(const std::string& s) {
  for (auto c : {Command::left, Command::right, Command::straight, Command::unknown})
    if (s == to_string(c)) return c;
  throw ValidationError("unknown command '" + s + "'");
}

BehaviorKind parse_behavior(const std::string& s) {
  for (auto k : {BehaviorKind::stationary, BehaviorKind::sudden_brake, BehaviorKind::intersection_cross,
                 BehaviorKind::cut_in})
    if (s == to_string(k)) return k;
  throw UnknownBehavior("unknown scripted behavior '" + s + "'");
}

const std::string& Participant::agent_id() const {
  if (auto* a = std::get_if<AgentMode>(&mode)) return a->agent_id;
  throw ValidationError("participant '" + id + "' is not an agent");
}

geom::OrientedBox2D Participant::footprint_at(const geom::Pose& pose) const {
  return {pose.translation.head<2>(), pose.yaw(), half_extents};
}

std::vector<const Participant*> Scenario::all_participants() const {
  std::vector<const Participant*> out{&ego};
  for (const auto& p : participants) out.push_back(&p);
  return out;
}

std::vector<const Participant*> Scenario::agents() const {
  std::vector<const Participant*> out;
  for (const auto* p : all_participants())
    if (p->is_agent()) out.push_back(p);
  return out;
}

const Participant* Scenario::find(const std::string& id) const {
  for (const auto* p : all_participants())
    if (p->id == id) return p;
  return nullptr;
}

const geom::Polyline& Scenario::route_of(const Participant& p) const {
  return p.route ? *p.route : background.centerline;
}

double Scenario::reference_progress(const Participant& p) const {
  const double horizon = sim.steps * sim.dt;
  if (!p.trajectory) return p.initial_speed * horizon;
  const auto& route = route_of(p);
  auto a = sample(*p.trajectory, 0.0), b = sample(*p.trajectory, horizon);
  return route.project({b.x, b.y}) - route.project({a.x, a.y});
}

void Scenario::validate() const {
  auto fail = [&](const std::string& what) { throw ValidationError("scenario '" + name + "': " + what); };
  if (!(sim.dt > 0)) fail("sim.dt must be positive");
  if (sim.steps < 1) fail("sim.steps must be at least 1");
  if (sim.plan_steps < 2) fail("sim.plan_steps must be at least 2");
  if (!(sim.agent_timeout > 0)) fail("sim.agent_timeout must be positive");
  if (!ego.is_agent()) fail("the ego must be in agent mode");
  if (background.drivable.empty()) fail("no drivable area");
  for (const auto& poly : background.drivable) poly.validate();
  background.centerline.validate();
  if (!(background.centerline.length() > 0)) fail("route centerline has zero length");
  if (!(background.ground_extent > 0)) fail("ground_extent must be positive");
  if (background.lightmaps) background.lightmaps->validate();
  for (const auto& m : background.meshes) m.mesh->validate();

  std::set<std::string> ids, agent_ids;
  for (const auto* p : all_participants()) {
    if (p->id.empty()) fail("participant with empty id");
    if (!ids.insert(p->id).second) fail("duplicate participant id '" + p->id + "'");
    if (!(p->half_extents.minCoeff() > 0) || !(p->height > 0)) fail("participant '" + p->id + "': extents must be > 0");
    p->material.validate();
    if (!p->mesh) fail("participant '" + p->id + "' has no mesh");
    if (std::holds_alternative<ReplayMode>(p->mode) && !p->trajectory)
      fail("replay participant '" + p->id + "' has no trajectory");
    if (p->trajectory) p->trajectory->validate();
    if (p->route) p->route->validate();
    if (auto* a = std::get_if<AgentMode>(&p->mode)) {
      if (a->agent_id.empty()) fail("agent participant '" + p->id + "' has no agent id");
      if (!agent_ids.insert(a->agent_id).second) fail("agent id '" + a->agent_id + "' bound to two participants");
    }
    if (!std::isfinite(p->x) || !std::isfinite(p->y) || !std::isfinite(p->heading) || !(p->initial_speed >= 0))
      fail("participant '" + p->id + "': invalid initial state");
  }
  if (mode == SimMode::multi_agent && agent_ids.size() < 2) fail("multi_agent mode needs at least two agents");
  if (mode != SimMode::multi_agent && agent_ids.size() != 1) fail("only the ego may be an agent outside multi_agent mode");
  sensors.validate();
  scoring.validate();
  sim.vehicle.validate();
}

// ---------------------------------------------------------------------------
// INI reading

namespace {

using LineIndex = std::map<std::string, std::map<std::string, std::size_t>>;

LineIndex index_lines(const std::filesystem::path& path) {
  LineIndex idx;
  std::ifstream in(path);
  std::string line, section;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == ';' || line[b] == '#') continue;
    if (line[b] == '[') {
      auto e = line.find(']', b);
      section = line.substr(b + 1, e - b - 1);
      idx[section][""] = n;
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(b, eq - b);
    key.erase(key.find_last_not_of(" \t") + 1);
    idx[section][key] = n;
  }
  return idx;
}

class Section {
 public:
  Section(const std::filesystem::path& file, const LineIndex& lines, std::string name, const pt::ptree* tree)
      : file_(file), lines_(lines), name_(std::move(name)), tree_(tree) {}

  bool present() const { return tree_ != nullptr; }
  bool has(const std::string& key) const { return raw(key) != nullptr; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    std::size_t line = 0;
    if (auto s = lines_.find(name_); s != lines_.end()) {
      auto k = s->second.find(key);
      line = k != s->second.end() ? k->second : s->second.count("") ? s->second.at("") : 0;
    }
    throw ParseError(file_.string(), line, key.empty() ? name_ : name_ + "." + key, what);
  }

  std::optional<std::string> str(const std::string& key) {
    const std::string* v = raw(key);
    if (!v) return std::nullopt;
    used_.insert(key);
    return *v;
  }
  std::string str(const std::string& key, const std::string& def) { return str(key).value_or(def); }
  std::string require(const std::string& key) {
    auto v = str(key);
    if (!v) fail(key, "required key missing");
    return *v;
  }

  std::vector<double> numbers(const std::string& key) {
    auto s = str(key);
    if (!s) return {};
    return parse_numbers(key, *s);
  }
  std::vector<double> parse_numbers(const std::string& key, const std::string& text) const {
    std::vector<double> out;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) {
      char* end = nullptr;
      double v = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size() || !std::isfinite(v)) fail(key, "not a number: '" + tok + "'");
      out.push_back(v);
    }
    return out;
  }
  std::vector<double> numbers(const std::string& key, std::size_t count) {
    auto v = numbers(key);
    if (has(key) && v.size() != count) fail(key, "expected " + std::to_string(count) + " numbers");
    return v;
  }
  double num(const std::string& key, double def) {
    auto v = numbers(key, 1);
    return v.empty() ? def : v[0];
  }
  int integer(const std::string& key, int def) {
    double v = num(key, def);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(key, "expected an integer");
    return int(v);
  }
  std::uint64_t uint(const std::string& key, std::uint64_t def) {
    auto s = str(key);
    if (!s) return def;
    char* end = nullptr;
    unsigned long long v = std::strtoull(s->c_str(), &end, 10);
    if (s->empty() || end != s->c_str() + s->size() || (*s)[0] == '-') fail(key, "expected a non-negative integer");
    return v;
  }
  bool boolean(const std::string& key, bool def) {
    auto s = str(key);
    if (!s) return def;
    if (*s == "true" || *s == "1") return true;
    if (*s == "false" || *s == "0") return false;
    fail(key, "expected true or false");
  }
  Vec3 vec3(const std::string& key, const Vec3& def) {
    auto v = numbers(key, 3);
    return v.empty() ? def : Vec3(v[0], v[1], v[2]);
  }
  Vec2 vec2(const std::string& key, const Vec2& def) {
    auto v = numbers(key, 2);
    return v.empty() ? def : Vec2(v[0], v[1]);
  }

  /// "x,y x,y ..." rings separated by ';'.
  std::vector<std::vector<Vec2>> rings(const std::string& key) {
    std::vector<std::vector<Vec2>> out;
    auto s = str(key);
    if (!s) return out;
    std::istringstream groups(*s);
    std::string group;
    while (std::getline(groups, group, ';')) {
      std::vector<Vec2> ring;
      std::istringstream pts(group);
      std::string pt;
      while (pts >> pt) {
        auto comma = pt.find(',');
        if (comma == std::string::npos) fail(key, "expected x,y pairs");
        auto xy = parse_numbers(key, pt.substr(0, comma) + " " + pt.substr(comma + 1));
        if (xy.size() != 2) fail(key, "expected x,y pairs");
        ring.emplace_back(xy[0], xy[1]);
      }
      if (!ring.empty()) out.push_back(std::move(ring));
    }
    return out;
  }

  /// Keys starting with `prefix`, with the prefix stripped.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    if (!tree_) return out;
    for (const auto& [k, v] : *tree_)
      if (k.rfind(prefix, 0) == 0) out.push_back(k.substr(prefix.size()));
    return out;
  }

  void finish() const {
    if (!tree_) return;
    for (const auto& [k, v] : *tree_)
      if (!used_.count(k)) fail(k, "unknown key");
  }

  const std::string& name() const { return name_; }

 private:
  const std::string* raw(const std::string& key) const {
    if (!tree_) return nullptr;
    auto it = tree_->find(key);
    return it == tree_->not_found() ? nullptr : &it->second.data();
  }

  const std::filesystem::path& file_;
  const LineIndex& lines_;
  std::string name_;
  const pt::ptree* tree_;
  std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel) {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : base / p;
}

geom::Polyline parse_polyline(Section& s, const std::string& key) {
  auto r = s.rings(key);
  if (r.size() > 1) s.fail(key, "expected a single polyline");
  return r.empty() ? geom::Polyline{} : geom::Polyline{r[0]};
}

template <class T, class F>
T wrap_validation(Section& s, const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    s.fail(key, e.what());
  }
}

Participant read_participant(Section& s, const std::string& id, const std::filesystem::path& base, bool is_ego) {
  Participant p;
  p.id = id;
  const std::string mode = s.str("mode", is_ego ? "agent" : "replay");
  if (mode == "agent") {
    AgentMode a;
    a.agent_id = s.str("agent", id);
    a.command = wrap_validation<Command>(s, "command", [&] { return parse_command(s.str("command", "unknown")); });
    p.mode = a;
  } else if (mode == "scripted") {
    ScriptedMode sm;
    auto& b = sm.behavior;
    try {
      b.kind = parse_behavior(s.require("behavior"));
    } catch (const UnknownBehavior& e) {
      s.fail("behavior", e.what());
    }
    b.trigger_distance = s.num("trigger_distance", b.trigger_distance);
    b.trigger_time = s.num("trigger_time", b.trigger_time);
    b.a_brake = s.num("a_brake", b.a_brake);
    b.lane_width = s.num("lane_width", b.lane_width);
    b.cut_duration = s.num("cut_duration", b.cut_duration);
    b.cut_direction = s.num("cut_direction", b.cut_direction);
    if (!(b.a_brake > 0)) s.fail("a_brake", "must be positive");
    if (!(b.cut_duration > 0)) s.fail("cut_duration", "must be positive");
    if (b.trigger_distance < 0) s.fail("trigger_distance", "must be non-negative");
    p.mode = sm;
  } else if (mode == "replay") {
    p.mode = ReplayMode{};
  } else {
    s.fail("mode", "expected replay, scripted or agent");
  }

  if (auto tp = s.str("trajectory")) {
    p.trajectory_path = *tp;
    p.trajectory = read_trajectory_csv(resolve(base, *tp));
  }
  const TrajectorySample first = p.trajectory ? p.trajectory->front() : TrajectorySample{};
  p.x = s.num("x", first.x);
  p.y = s.num("y", first.y);
  p.heading = s.num("heading", first.heading);
  p.initial_speed = s.num("speed", first.v);

  double length = s.num("length", 2 * p.half_extents.x());
  double width = s.num("width", 2 * p.half_extents.y());
  p.half_extents = Vec2(length / 2, width / 2);
  p.height = s.num("height", p.height);
  p.material.albedo = s.vec3("albedo", p.material.albedo);
  p.material.roughness = s.num("roughness", p.material.roughness);
  p.material.metallic = s.num("metallic", p.material.metallic);
  p.material.specular = s.num("specular", p.material.specular);
  if (auto mp = s.str("mesh")) {
    p.mesh_path = *mp;
    p.mesh = std::make_shared<geom::TriangleMesh>(geom::load_mesh(resolve(base, *mp)));
  } else if (length > 0 && width > 0 && p.height > 0) {
    p.mesh = std::make_shared<geom::TriangleMesh>(geom::make_vehicle(length, width, p.height, p.material.albedo));
  }
  if (s.has("route")) p.route = parse_polyline(s, "route");
  for (const auto& k : s.keys_with_prefix("rule.")) p.agent_params[k] = s.num("rule." + k, 0.0);
  s.finish();
  return p;
}

void read_camera(Section& s, int i, sensors::CameraModel& c) {
  const std::string pre = "camera." + std::to_string(i) + ".";
  auto in = s.numbers(pre + "intrinsics", 4);
  if (in.empty()) s.fail(pre + "intrinsics", "required key missing");
  c.fx = in[0], c.fy = in[1], c.cx = in[2], c.cy = in[3];
  auto res = s.numbers(pre + "resolution", 2);
  if (res.empty()) s.fail(pre + "resolution", "required key missing");
  c.width = int(res[0]), c.height = int(res[1]);
  if (auto m = s.numbers(pre + "mount", 6); !m.empty())
    c.mount = {Vec3(m[0], m[1], m[2]), m[3], m[4], m[5]};
  if (auto e = s.numbers(pre + "exposure", 12); !e.empty()) {
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) c.exposure_A(r, col) = e[3 * r + col];
    c.exposure_t = Vec3(e[9], e[10], e[11]);
  }
}

}  // namespace

Scenario load_scenario(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingAsset(path.string());
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(path.string(), e.line(), "", e.message());
  }
  const LineIndex lines = index_lines(path);
  const auto base = path.parent_path();
  auto section = [&](const std::string& name) {
    auto it = tree.find(name);
    return Section(path, lines, name, it == tree.not_found() ? nullptr : &it->second);
  };
  for (const auto& [name, child] : tree) {
    static const std::set<std::string> known{"scenario", "background", "ego", "sensors", "sim", "scoring"};
    if (!known.count(name) && name.rfind("participant.", 0) != 0)
      Section(path, lines, name, &child).fail("", "unknown section");
    if (child.data().size() && child.empty()) Section(path, lines, "", nullptr).fail(name, "key outside a section");
  }

  Scenario sc;
  sc.source = path;
  {
    auto s = section("scenario");
    sc.name = s.str("name", path.stem().string());
    sc.mode = wrap_validation<SimMode>(s, "mode", [&] { return parse_mode(s.str("mode", "non_reactive")); });
    s.finish();
  }
  {
    auto s = section("background");
    if (!s.present()) s.fail("", "missing [background] section");
    auto& bg = sc.background;
    if (auto m = s.str("meshes")) {
      std::istringstream ss(*m);
      std::string p;
      while (ss >> p)
        bg.meshes.push_back({p, std::make_shared<geom::TriangleMesh>(geom::load_mesh(resolve(base, p)))});
    }
    bg.ground_z = s.num("ground_z", bg.ground_z);
    bg.ground_extent = s.num("ground_extent", bg.ground_extent);
    bg.ground_albedo = s.vec3("ground_albedo", bg.ground_albedo);
    for (auto& r : s.rings("drivable")) bg.drivable.push_back({std::move(r)});
    bg.centerline = parse_polyline(s, "centerline");
    if (bg.centerline.points.empty()) s.fail("centerline", "required key missing");
    bg.sky = s.vec3("sky", bg.sky);
    bg.lightmap = s.str("lightmap", "fit");
    if (bg.lightmap != "fit") bg.lightmaps = relight::load_lightmaps(resolve(base, bg.lightmap));
    if (s.has("sun")) bg.sun = s.vec3("sun", Vec3::UnitZ());
    if (auto rc = s.str("reference_cloud")) {
      bg.reference_cloud_path = *rc;
      bg.reference_cloud = reg::read_cloud(resolve(base, *rc));
    }
    s.finish();
  }
  {
    auto s = section("ego");
    if (!s.present()) s.fail("", "missing [ego] section");
    sc.ego = read_participant(s, "ego", base, true);
  }
  for (const auto& [name, child] : tree) {
    if (name.rfind("participant.", 0) != 0) continue;
    Section s(path, lines, name, &child);
    sc.participants.push_back(read_participant(s, name.substr(12), base, false));
  }
  {
    auto s = section("sensors");
    auto& r = sc.sensors;
    for (int i = 0; s.has("camera." + std::to_string(i) + ".intrinsics"); ++i) read_camera(s, i, r.cameras.emplace_back());
    r.lidar.channels = s.integer("lidar.channels", r.lidar.channels);
    if (auto v = s.numbers("lidar.vfov", 2); !v.empty()) r.lidar.vfov_min = v[0], r.lidar.vfov_max = v[1];
    r.lidar.azimuths = s.integer("lidar.azimuths", r.lidar.azimuths);
    r.lidar.max_range = s.num("lidar.max_range", r.lidar.max_range);
    if (auto m = s.numbers("lidar.mount", 6); !m.empty()) r.lidar.mount = {Vec3(m[0], m[1], m[2]), m[3], m[4], m[5]};
    r.bev.extent = s.num("bev.extent", r.bev.extent);
    r.bev.cells = s.integer("bev.cells", r.bev.cells);
    r.bev.split_height = s.num("bev.split_height", r.bev.split_height);
    r.bev.clip_max = s.num("bev.clip_max", r.bev.clip_max);
    r.shade_samples = s.integer("shade_samples", r.shade_samples);
    r.shadow_samples = s.integer("shadow_samples", r.shadow_samples);
    r.include_images = s.boolean("include_images", r.include_images);
    r.include_points = s.boolean("include_points", r.include_points);
    s.finish();
  }
  {
    auto s = section("sim");
    auto& m = sc.sim;
    m.dt = s.num("dt", m.dt);
    m.steps = s.integer("steps", m.steps);
    m.seed = s.uint("seed", m.seed);
    m.plan_steps = s.integer("plan_steps", m.plan_steps);
    m.agent_timeout = s.num("agent_timeout", m.agent_timeout);
    auto& v = m.vehicle;
    v.wheelbase = s.num("vehicle.wheelbase", v.wheelbase);
    v.steer_max = s.num("vehicle.steer_max", v.steer_max);
    v.a_min = s.num("vehicle.a_min", v.a_min);
    v.a_max = s.num("vehicle.a_max", v.a_max);
    v.steer_rate_max = s.num("vehicle.steer_rate_max", v.steer_rate_max);
    auto& c = m.controller;
    c.q_lat = s.vec2("controller.q_lat", c.q_lat);
    c.r_lat = s.num("controller.r_lat", c.r_lat);
    c.q_lon = s.vec2("controller.q_lon", c.q_lon);
    c.r_lon = s.num("controller.r_lon", c.r_lon);
    s.finish();
  }
  {
    auto s = section("scoring");
    auto& c = sc.scoring;
    c.w_ep = s.num("w_ep", c.w_ep);
    c.w_ttc = s.num("w_ttc", c.w_ttc);
    c.w_c = s.num("w_c", c.w_c);
    c.ttc_threshold = s.num("ttc_threshold", c.ttc_threshold);
    c.ttc_horizon = s.num("ttc_horizon", c.ttc_horizon);
    auto& b = c.comfort;
    b.a_lon_min = s.num("comfort.a_lon_min", b.a_lon_min);
    b.a_lon_max = s.num("comfort.a_lon_max", b.a_lon_max);
    b.a_lat_max = s.num("comfort.a_lat_max", b.a_lat_max);
    b.jerk_max = s.num("comfort.jerk_max", b.jerk_max);
    b.yaw_rate_max = s.num("comfort.yaw_rate_max", b.yaw_rate_max);
    b.yaw_acc_max = s.num("comfort.yaw_acc_max", b.yaw_acc_max);
    c.at_fault_exclusion = s.boolean("at_fault_exclusion", c.at_fault_exclusion);
    s.finish();
  }
  try {
    sc.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return sc;
}

// ---------------------------------------------------------------------------
// INI writing

namespace {

std::string num(double v) { return fmt::format("{}", v); }

std::string nums(std::initializer_list<double> vs) {
  std::string out;
  for (double v : vs) out += (out.empty() ? "" : " ") + num(v);
  return out;
}

std::string ring(const std::vector<Vec2>& pts) {
  std::string out;
  for (const auto& p : pts) out += (out.empty() ? "" : " ") + num(p.x()) + "," + num(p.y());
  return out;
}

void write_participant(std::string& out, const Participant& p, bool is_ego) {
  out += is_ego ? "[ego]\n" : "[participant." + p.id + "]\n";
  auto kv = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  if (auto* a = std::get_if<AgentMode>(&p.mode)) {
    kv("mode", "agent");
    kv("agent", a->agent_id);
    kv("command", to_string(a->command));
  } else if (auto* s = std::get_if<ScriptedMode>(&p.mode)) {
    const auto& b = s->behavior;
    kv("mode", "scripted");
    kv("behavior", to_string(b.kind));
    kv("trigger_distance", num(b.trigger_distance));
    kv("trigger_time", num(b.trigger_time));
    kv("a_brake", num(b.a_brake));
    kv("lane_width", num(b.lane_width));
    kv("cut_duration", num(b.cut_duration));
    kv("cut_direction", num(b.cut_direction));
  } else {
    kv("mode", "replay");
  }
  if (!p.trajectory_path.empty()) kv("trajectory", p.trajectory_path);
  kv("x", num(p.x));
  kv("y", num(p.y));
  kv("heading", num(p.heading));
  kv("speed", num(p.initial_speed));
  kv("length", num(2 * p.half_extents.x()));
  kv("width", num(2 * p.half_extents.y()));
  kv("height", num(p.height));
  if (!p.mesh_path.empty()) kv("mesh", p.mesh_path);
  kv("albedo", nums({p.material.albedo.x(), p.material.albedo.y(), p.material.albedo.z()}));
  kv("roughness", num(p.material.roughness));
  kv("metallic", num(p.material.metallic));
  kv("specular", num(p.material.specular));
  if (p.route) kv("route", ring(p.route->points));
  for (const auto& [k, v] : p.agent_params) kv("rule." + k, num(v));
  out += "\n";
}

}  // namespace

std::string serialize_scenario(const Scenario& sc) {
  std::string out;
  auto kv = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  auto v3 = [](const Vec3& v) { return nums({v.x(), v.y(), v.z()}); };
  auto mount = [](const sensors::Mount& m) {
    return nums({m.position.x(), m.position.y(), m.position.z(), m.yaw, m.pitch, m.roll});
  };

  out += "[scenario]\n";
  kv("name", sc.name);
  kv("mode", to_string(sc.mode));
  out += "\n[background]\n";
  const auto& bg = sc.background;
  if (!bg.meshes.empty()) {
    std::string m;
    for (const auto& mesh : bg.meshes) m += (m.empty() ? "" : " ") + mesh.path;
    kv("meshes", m);
  }
  kv("ground_z", num(bg.ground_z));
  kv("ground_extent", num(bg.ground_extent));
  kv("ground_albedo", v3(bg.ground_albedo));
  std::string drivable;
  for (const auto& poly : bg.drivable) drivable += (drivable.empty() ? "" : "; ") + ring(poly.ring);
  kv("drivable", drivable);
  kv("centerline", ring(bg.centerline.points));
  kv("sky", v3(bg.sky));
  kv("lightmap", bg.lightmap);
  if (bg.sun) kv("sun", v3(*bg.sun));
  if (!bg.reference_cloud_path.empty()) kv("reference_cloud", bg.reference_cloud_path);
  out += "\n";

  write_participant(out, sc.ego, true);
  for (const auto& p : sc.participants) write_participant(out, p, false);

  out += "[sensors]\n";
  const auto& r = sc.sensors;
  for (std::size_t i = 0; i < r.cameras.size(); ++i) {
    const auto& c = r.cameras[i];
    const std::string pre = "camera." + std::to_string(i) + ".";
    kv(pre + "intrinsics", nums({c.fx, c.fy, c.cx, c.cy}));
    kv(pre + "resolution", nums({double(c.width), double(c.height)}));
    kv(pre + "mount", mount(c.mount));
    const auto& A = c.exposure_A;
    kv(pre + "exposure", nums({A(0, 0), A(0, 1), A(0, 2), A(1, 0), A(1, 1), A(1, 2), A(2, 0), A(2, 1), A(2, 2),
                               c.exposure_t.x(), c.exposure_t.y(), c.exposure_t.z()}));
  }
  kv("lidar.channels", std::to_string(r.lidar.channels));
  kv("lidar.vfov", nums({r.lidar.vfov_min, r.lidar.vfov_max}));
  kv("lidar.azimuths", std::to_string(r.lidar.azimuths));
  kv("lidar.max_range", num(r.lidar.max_range));
  kv("lidar.mount", mount(r.lidar.mount));
  kv("bev.extent", num(r.bev.extent));
  kv("bev.cells", std::to_string(r.bev.cells));
  kv("bev.split_height", num(r.bev.split_height));
  kv("bev.clip_max", num(r.bev.clip_max));
  kv("shade_samples", std::to_string(r.shade_samples));
  kv("shadow_samples", std::to_string(r.shadow_samples));
  kv("include_images", r.include_images ? "true" : "false");
  kv("include_points", r.include_points ? "true" : "false");

  out += "\n[sim]\n";
  const auto& m = sc.sim;
  kv("dt", num(m.dt));
  kv("steps", std::to_string(m.steps));
  kv("seed", std::to_string(m.seed));
  kv("plan_steps", std::to_string(m.plan_steps));
  kv("agent_timeout", num(m.agent_timeout));
  kv("vehicle.wheelbase", num(m.vehicle.wheelbase));
  kv("vehicle.steer_max", num(m.vehicle.steer_max));
  kv("vehicle.a_min", num(m.vehicle.a_min));
  kv("vehicle.a_max", num(m.vehicle.a_max));
  kv("vehicle.steer_rate_max", num(m.vehicle.steer_rate_max));
  kv("controller.q_lat", nums({m.controller.q_lat[0], m.controller.q_lat[1]}));
  kv("controller.r_lat", num(m.controller.r_lat));
  kv("controller.q_lon", nums({m.controller.q_lon[0], m.controller.q_lon[1]}));
  kv("controller.r_lon", num(m.controller.r_lon));

  out += "\n[scoring]\n";
  const auto& c = sc.scoring;
  kv("w_ep", num(c.w_ep));
  kv("w_ttc", num(c.w_ttc));
  kv("w_c", num(c.w_c));
  kv("ttc_threshold", num(c.ttc_threshold));
  kv("ttc_horizon", num(c.ttc_horizon));
  kv("comfort.a_lon_min", num(c.comfort.a_lon_min));
  kv("comfort.a_lon_max", num(c.comfort.a_lon_max));
  kv("comfort.a_lat_max", num(c.comfort.a_lat_max));
  kv("comfort.jerk_max", num(c.comfort.jerk_max));
  kv("comfort.yaw_rate_max", num(c.comfort.yaw_rate_max));
  kv("comfort.yaw_acc_max", num(c.comfort.yaw_acc_max));
  kv("at_fault_exclusion", c.at_fault_exclusion ? "true" : "false");
  return out;
}

std::vector<std::filesystem::path> find_scenarios(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw MissingAsset(dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ini") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace drivesim::scene
