#include "drivesim/cli/cli.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "drivesim/agents/agent.hpp"
#include "drivesim/common/error.hpp"
#include "drivesim/registration/registration.hpp"
#include "drivesim/score/score.hpp"
#include "drivesim/sensors/render.hpp"
#include "drivesim/simloop/simloop.hpp"

namespace drivesim::cli {
namespace fs = std::filesystem;

namespace {

std::vector<double> split_numbers(const std::string& text, char sep) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ValidationError("not a number: '" + item + "'");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos) throw ValidationError("not a number: '" + item + "'");
    if (!std::isfinite(v)) throw ValidationError("not finite: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

void apply_weights(score::ScoreConfig& cfg, const std::array<double, 3>& w) {
  cfg.w_ep = w[0];
  cfg.w_ttc = w[1];
  cfg.w_c = w[2];
}

// Runs f, turning library errors into exit codes with a message on err.
template <class F>
int guarded(std::ostream& err, F&& f) {
  try {
    return f();
  } catch (const AgentTimeout& e) {
    fmt::print(err, "agent failure: {}\n", e.what());
    return kAgentFailure;
  } catch (const ProtocolError& e) {
    fmt::print(err, "agent failure: {}\n", e.what());
    return kAgentFailure;
  } catch (const AgentDisconnected& e) {
    fmt::print(err, "agent failure: {}\n", e.what());
    return kAgentFailure;
  } catch (const Error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kConfigError;
  }
}

using Handles = std::map<std::string, std::unique_ptr<agents::AgentHandle>>;

// Built-ins run in process; agents sharing an endpoint are accepted together.
Handles connect_agents(const scene::Scenario& sc, const RunManifest& m, std::map<std::string, std::string>& bindings) {
  Handles handles;
  std::map<std::string, std::set<std::string>> by_endpoint;
  for (const auto* p : sc.agents()) {
    const auto& id = p->agent_id();
    const auto b = binding_for(m, id);
    bindings[id] = b;
    if (agents::Endpoint::looks_like(b))
      by_endpoint[b].insert(id);
    else
      handles[id] = std::make_unique<agents::InProcessAgent>(agents::make_builtin(b, *p));
  }
  for (const auto& [ep, ids] : by_endpoint) {
    agents::Listener listener(agents::Endpoint::parse(ep));
    for (auto& [id, h] : agents::accept_agents(listener, ids, m.accept_timeout)) handles[id] = std::move(h);
  }
  return handles;
}

bool has_recordings(const scene::Scenario& sc) {
  const auto list = sc.agents();
  return std::all_of(list.begin(), list.end(), [](const scene::Participant* p) { return p->trajectory.has_value(); });
}

void emit_reports(const std::vector<score::ScenarioReport>& reports, const fs::path& dir, std::ostream& out) {
  const auto table = score::report_table(reports);
  fs::create_directories(dir);
  write_text(dir / "report.txt", table);
  write_text(dir / "report.json", score::report_json(reports) + "\n");
  out << table;
}

std::vector<fs::path> files_with_extension(const fs::path& p, const std::string& ext) {
  if (!fs::exists(p)) throw MissingAsset(p.string());
  if (!fs::is_directory(p)) return {p};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

geom::Pose parse_pose(const std::string& text) {
  const auto v = split_numbers(text, ',');
  if (v.size() != 3) throw ValidationError("pose must be x,y,heading: '" + text + "'");
  return geom::Pose::planar(v[0], v[1], v[2]);
}

std::array<double, 3> parse_weights(const std::string& text) {
  const auto v = split_numbers(text, ',');
  if (v.size() != 3) throw ValidationError("weights must be w_ep,w_ttc,w_c: '" + text + "'");
  if (v[0] < 0 || v[1] < 0 || v[2] < 0 || v[0] + v[1] + v[2] <= 0)
    throw ValidationError("weights must be non-negative with a positive sum");
  return {v[0], v[1], v[2]};
}

std::string binding_for(const RunManifest& m, const std::string& agent_id) {
  if (auto it = m.agents.find(agent_id); it != m.agents.end()) return it->second;
  if (auto it = m.agents.find("*"); it != m.agents.end()) return it->second;
  throw ValidationError("no binding for agent '" + agent_id + "' (use --agent " + agent_id + "=<builtin|endpoint>)");
}

std::vector<scene::Scenario> load_scenarios(const RunManifest& m) {
  std::vector<fs::path> files;
  for (const auto& p : m.scenarios) {
    if (fs::is_directory(p)) {
      auto found = scene::find_scenarios(p);
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  if (files.empty()) throw ValidationError("no scenarios given");
  for (const auto& [id, b] : m.agents) {
    if (agents::Endpoint::looks_like(b))
      agents::Endpoint::parse(b);
    else if (!agents::is_builtin(b))
      throw ValidationError("agent '" + id + "': '" + b + "' is neither a built-in agent nor an endpoint");
  }
  std::vector<scene::Scenario> out;
  std::set<std::string> names;
  for (const auto& f : files) {
    auto sc = scene::load_scenario(f);
    if (m.mode && sc.mode != *m.mode) continue;
    if (m.seed) sc.sim.seed = *m.seed;
    if (m.n_steps) sc.sim.steps = *m.n_steps;
    if (m.dt) sc.sim.dt = *m.dt;
    if (m.weights) apply_weights(sc.scoring, *m.weights);
    sc.validate();
    if (!names.insert(sc.name).second) throw ValidationError("duplicate scenario name '" + sc.name + "'");
    for (const auto* p : sc.agents()) binding_for(m, p->agent_id());
    out.push_back(std::move(sc));
  }
  if (out.empty()) throw ValidationError("no scenario matches the requested mode");
  return out;
}

int cmd_run(const RunManifest& m, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto scenarios = load_scenarios(m);
    const auto logs = m.out / "logs";
    fs::create_directories(logs);
    if (m.dump_frames) fs::create_directories(*m.dump_frames);

    int status = kOk;
    std::vector<score::ScenarioReport> reports;
    for (const auto& sc : scenarios) {
      simloop::RunOptions opt;
      if (m.dump_frames) opt.dump_dir = *m.dump_frames / sc.name;
      simloop::SimLog log;
      try {
        auto handles = connect_agents(sc, m, opt.bindings);
        log = simloop::run(sc, handles, opt);
      } catch (const AgentTimeout& e) {
        fmt::print(err, "{}: agent failure: {}\n", sc.name, e.what());
        status = kAgentFailure;
        continue;
      } catch (const ProtocolError& e) {
        fmt::print(err, "{}: agent failure: {}\n", sc.name, e.what());
        status = kAgentFailure;
        continue;
      }
      if (log.termination != "completed") {
        fmt::print(err, "{}: run ended early: {}\n", sc.name, log.termination);
        status = kAgentFailure;
      }
      write_text(logs / (sc.name + ".jsonl"), simloop::serialize_log(log));
      auto report = score::score_log(log, sc.scoring);
      if (has_recordings(sc)) {
        const auto open = simloop::open_loop_log(sc);
        write_text(logs / (sc.name + ".open_loop.jsonl"), simloop::serialize_log(open));
        report.open_loop_pdms = score::score_log(open, sc.scoring).pdms;
      }
      reports.push_back(std::move(report));
    }
    if (!reports.empty()) emit_reports(reports, m.out, out);
    return status;
  });
}

int cmd_score(const ScoreRequest& r, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<fs::path> files;
    for (const auto& p : r.paths) {
      auto found = files_with_extension(p, ".jsonl");
      files.insert(files.end(), found.begin(), found.end());
    }
    if (files.empty()) throw ValidationError("no logs to score");
    std::vector<simloop::SimLog> closed, open;
    for (const auto& f : files) {
      try {
        auto log = simloop::read_log(f);
        (log.header.origin == "open_loop" ? open : closed).push_back(std::move(log));
      } catch (const LogFormatError& e) {
        fmt::print(err, "error: {}: {}\n", f.string(), e.what());
        return int(kConfigError);
      }
    }
    auto cfg_of = [&](const simloop::SimLog& log) {
      auto cfg = log.header.scoring;
      if (r.weights) apply_weights(cfg, *r.weights);
      return cfg;
    };
    std::vector<score::ScenarioReport> reports;
    std::set<std::string> paired;
    for (const auto& log : closed) {
      auto report = score::score_log(log, cfg_of(log));
      for (const auto& o : open) {
        if (o.header.scenario != log.header.scenario) continue;
        report.open_loop_pdms = score::score_log(o, cfg_of(o)).pdms;
        paired.insert(o.header.scenario);
      }
      reports.push_back(std::move(report));
    }
    for (const auto& o : open)
      if (!paired.count(o.header.scenario)) reports.push_back(score::score_log(o, cfg_of(o)));
    if (r.out)
      emit_reports(reports, *r.out, out);
    else
      out << score::report_table(reports);
    return int(kOk);
  });
}

int cmd_register(const RegisterRequest& r, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto files = files_with_extension(r.clouds, ".bin");
    if (files.empty()) throw ValidationError("no *.bin clouds in " + r.clouds.string());
    std::vector<reg::PointCloud> frames;
    for (const auto& f : files) frames.push_back(reg::read_cloud(f));
    std::vector<reg::FrameAnnotations> ann;
    if (r.annotations) {
      ann = reg::read_annotations(*r.annotations);
      if (ann.size() != frames.size())
        throw ValidationError(fmt::format("{} annotated frames for {} clouds", ann.size(), frames.size()));
    }
    reg::RegistrationOptions opt;
    opt.full_se3 = r.full_se3;
    const auto res = reg::correct_sequence(frames, ann, r.reference, opt);
    std::string text = fmt::format("# reference {}\n# frame file x y z yaw pitch roll final_cd iterations status\n",
                                   res.reference_index);
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto& c = res.corrections[i];
      const auto& R = c.rotation;
      const auto& d = res.details[i];
      const char* status = d.status == reg::RegistrationStatus::converged         ? "converged"
                           : d.status == reg::RegistrationStatus::non_convergence ? "non_convergence"
                                                                                  : "degenerate";
      text += fmt::format("{} {} {} {} {} {} {} {} {} {} {}\n", i, files[i].filename().string(), c.translation.x(),
                          c.translation.y(), c.translation.z(), std::atan2(R(1, 0), R(0, 0)),
                          std::asin(std::clamp(-R(2, 0), -1.0, 1.0)), std::atan2(R(2, 1), R(2, 2)), d.final_cd,
                          d.iterations, status);
    }
    if (r.out.has_parent_path()) fs::create_directories(r.out.parent_path());
    write_text(r.out, text);
    fmt::print(out, "wrote {} corrected poses to {}\n", files.size(), r.out.string());
    return int(kOk);
  });
}

int cmd_render(const RenderRequest& r, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto pose = parse_pose(r.pose);
    auto sc = scene::load_scenario(r.scenario);
    if (r.seed) sc.sim.seed = *r.seed;
    if (sc.sensors.cameras.empty()) {
      sensors::CameraModel cam;
      cam.width = 160;
      cam.height = 120;
      cam.fx = cam.fy = 80.0;
      cam.cx = 80.0;
      cam.cy = 60.0;
      sc.sensors.cameras.push_back(cam);
    }
    std::map<std::string, control::EgoState> states;
    for (const auto* p : sc.agents()) states[p->agent_id()] = {r.t, p->x, p->y, p->heading, p->initial_speed, 0.0, 0.0};
    auto& ego = states.at(sc.ego.agent_id());
    ego.x = pose.translation.x();
    ego.y = pose.translation.y();
    ego.heading = pose.yaw();
    scene::TriggerTimes triggers;
    const auto snap = scene::compose(sc, r.t, states, triggers);
    const auto world = sensors::build_static_world(sc);
    const sensors::DynamicWorld dyn(snap);
    sensors::RenderOptions ro;
    ro.seed = sc.sim.seed;
    ro.shade_samples = sc.sensors.shade_samples;
    ro.shadow_samples = sc.sensors.shadow_samples;
    const auto frame = sensors::render_frame(world, dyn, 0, sc.sensors, ro);
    fs::create_directories(r.out);
    sensors::dump_frame(frame, (r.out / "render_").string());
    std::size_t mask = 0;
    for (float v : frame.cameras[0].mask.data) mask += v > 0.0f;
    fmt::print(out, "rendered {} camera(s) to {}; {} participant pixels in camera 0\n", frame.cameras.size(),
               r.out.string(), mask);
    return int(kOk);
  });
}

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop driving simulation harness"};
  app.require_subcommand(1);

  RunManifest run;
  std::vector<std::string> agent_flags;
  std::string mode, weights;
  std::vector<std::string> scenario_files, suites;
  auto* run_cmd = app.add_subcommand("run", "Run scenarios closed loop, write logs and reports");
  run_cmd->add_option("--scenario", scenario_files, "Scenario file (repeatable)");
  run_cmd->add_option("--suite", suites, "Directory searched for *.ini scenarios (repeatable)");
  run_cmd->add_option("--mode", mode, "Keep only non_reactive, safety_test or multi_agent scenarios");
  run_cmd->add_option("--seed", run.seed, "Override the scenario seed");
  run_cmd->add_option("--agent", agent_flags, "id=builtin|endpoint; id '*' binds every unbound agent");
  run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
  run_cmd->add_option("--dump-frames", run.dump_frames, "Write per-step sensor frames under this directory");
  run_cmd->add_option("--weights", weights, "Score weights w_ep,w_ttc,w_c");
  run_cmd->add_option("--n-steps", run.n_steps, "Override the number of steps");
  run_cmd->add_option("--dt", run.dt, "Override the step length in seconds");
  run_cmd->add_option("--accept-timeout", run.accept_timeout, "Seconds to wait for external agents")
      ->capture_default_str();

  ScoreRequest score_req;
  std::string score_weights;
  auto* score_cmd = app.add_subcommand("score", "Re-score logs");
  score_cmd->add_option("logs", score_req.paths, "Log files or directories")->required();
  score_cmd->add_option("--weights", score_weights, "Score weights w_ep,w_ttc,w_c");
  score_cmd->add_option("--out", score_req.out, "Write report.txt and report.json here");

  RegisterRequest reg_req;
  auto* reg_cmd = app.add_subcommand("register", "Correct per-frame poses by cloud registration");
  reg_cmd->add_option("--clouds", reg_req.clouds, "Directory of world-frame *.bin clouds")->required();
  reg_cmd->add_option("--annotations", reg_req.annotations, "Annotation file");
  reg_cmd->add_option("--reference", reg_req.reference, "Reference frame index (default: central)");
  reg_cmd->add_flag("--full-se3", reg_req.full_se3, "Solve all six degrees of freedom");
  reg_cmd->add_option("--out", reg_req.out, "Corrected poses file")->capture_default_str();

  RenderRequest render_req;
  auto* render_cmd = app.add_subcommand("render", "Render one frame from an ego pose");
  render_cmd->add_option("--scenario", render_req.scenario, "Scenario file")->required();
  render_cmd->add_option("--pose", render_req.pose, "Ego pose x,y,heading")->required();
  render_cmd->add_option("--t", render_req.t, "Scene time in seconds");
  render_cmd->add_option("--seed", render_req.seed, "Override the scenario seed");
  render_cmd->add_option("--out", render_req.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*run_cmd) {
    return guarded(std::cerr, [&] {
      for (const auto& f : scenario_files) run.scenarios.emplace_back(f);
      for (const auto& s : suites) run.scenarios.emplace_back(s);
      if (!mode.empty()) run.mode = scene::parse_mode(mode);
      if (!weights.empty()) run.weights = parse_weights(weights);
      for (const auto& a : agent_flags) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == a.size())
          throw ValidationError("--agent expects id=builtin|endpoint, got '" + a + "'");
        run.agents[a.substr(0, eq)] = a.substr(eq + 1);
      }
      return cmd_run(run, std::cout, std::cerr);
    });
  }
  if (*score_cmd) {
    return guarded(std::cerr, [&] {
      if (!score_weights.empty()) score_req.weights = parse_weights(score_weights);
      return cmd_score(score_req, std::cout, std::cerr);
    });
  }
  if (*reg_cmd) return cmd_register(reg_req, std::cout, std::cerr);
  return cmd_render(render_req, std::cout, std::cerr);
}

}  // namespace drivesim::cli
