#include "drivesim/simloop/log.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "drivesim/common/error.hpp"

namespace drivesim::simloop {

using nlohmann::json;

namespace {

json points_json(const std::vector<Vec2>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x(), p.y()});
  return a;
}

std::vector<Vec2> points_from(const json& a) {
  std::vector<Vec2> out;
  for (const auto& p : a) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return out;
}

json scoring_json(const score::ScoreConfig& c) {
  return {{"w_ep", c.w_ep},
          {"w_ttc", c.w_ttc},
          {"w_c", c.w_c},
          {"ttc_threshold", c.ttc_threshold},
          {"ttc_horizon", c.ttc_horizon},
          {"a_lon_min", c.comfort.a_lon_min},
          {"a_lon_max", c.comfort.a_lon_max},
          {"a_lat_max", c.comfort.a_lat_max},
          {"jerk_max", c.comfort.jerk_max},
          {"yaw_rate_max", c.comfort.yaw_rate_max},
          {"yaw_acc_max", c.comfort.yaw_acc_max},
          {"at_fault_exclusion", c.at_fault_exclusion}};
}

score::ScoreConfig scoring_from(const json& j) {
  score::ScoreConfig c;
  c.w_ep = j.at("w_ep");
  c.w_ttc = j.at("w_ttc");
  c.w_c = j.at("w_c");
  c.ttc_threshold = j.at("ttc_threshold");
  c.ttc_horizon = j.at("ttc_horizon");
  c.comfort.a_lon_min = j.at("a_lon_min");
  c.comfort.a_lon_max = j.at("a_lon_max");
  c.comfort.a_lat_max = j.at("a_lat_max");
  c.comfort.jerk_max = j.at("jerk_max");
  c.comfort.yaw_rate_max = j.at("yaw_rate_max");
  c.comfort.yaw_acc_max = j.at("yaw_acc_max");
  c.at_fault_exclusion = j.at("at_fault_exclusion");
  return c;
}

json states_json(const std::vector<ParticipantRecord>& states) {
  json a = json::array();
  for (const auto& s : states) a.push_back({s.x, s.y, s.heading, s.v});
  return a;
}

std::vector<ParticipantRecord> states_from(const json& a) {
  std::vector<ParticipantRecord> out;
  for (const auto& s : a) out.push_back({s.at(0), s.at(1), s.at(2), s.at(3)});
  return out;
}

json header_json(const LogHeader& h) {
  json parts = json::array();
  for (const auto& p : h.participants)
    parts.push_back({{"id", p.id}, {"half_extents", {p.half_extents.x(), p.half_extents.y()}}});
  json agents = json::array();
  for (const auto& a : h.agents)
    agents.push_back({{"id", a.id},
                      {"participant", a.participant},
                      {"command", scene::to_string(a.command)},
                      {"route", points_json(a.route.points)},
                      {"reference_progress", a.reference_progress},
                      {"binding", a.binding}});
  json drivable = json::array();
  for (const auto& p : h.drivable) drivable.push_back(points_json(p.ring));
  return {{"type", "header"},     {"scenario", h.scenario}, {"mode", scene::to_string(h.mode)},
          {"origin", h.origin},   {"seed", h.seed},         {"t0", h.t0},
          {"dt", h.dt},           {"steps", h.steps},       {"participants", parts},
          {"agents", agents},     {"drivable", drivable},   {"scoring", scoring_json(h.scoring)}};
}

LogHeader header_from(const json& j) {
  LogHeader h;
  h.scenario = j.at("scenario");
  h.mode = scene::parse_mode(j.at("mode"));
  h.origin = j.at("origin");
  h.seed = j.at("seed");
  h.t0 = j.at("t0");
  h.dt = j.at("dt");
  h.steps = j.at("steps");
  for (const auto& p : j.at("participants"))
    h.participants.push_back({p.at("id"), Vec2(p.at("half_extents").at(0), p.at("half_extents").at(1))});
  for (const auto& a : j.at("agents")) {
    AgentInfo ai;
    ai.id = a.at("id");
    ai.participant = a.at("participant");
    ai.command = scene::parse_command(a.at("command"));
    ai.route.points = points_from(a.at("route"));
    ai.reference_progress = a.at("reference_progress");
    ai.binding = a.at("binding");
    if (ai.participant < 0 || ai.participant >= int(h.participants.size()))
      throw ValidationError("agent participant index out of range");
    h.agents.push_back(std::move(ai));
  }
  for (const auto& p : j.at("drivable")) h.drivable.push_back({points_from(p)});
  h.scoring = scoring_from(j.at("scoring"));
  return h;
}

json step_json(const StepRecord& s) {
  json agents = json::array();
  for (const auto& a : s.agents) {
    json plan = json::array();
    for (const auto& w : a.plan.samples) plan.push_back({w.t, w.x, w.y, w.heading, w.v});
    agents.push_back({{"id", a.id},
                      {"plan", plan},
                      {"controls", {a.controls.a, a.controls.steering}},
                      {"digest", a.frame_digest}});
  }
  return {{"type", "step"}, {"k", s.k}, {"t", s.t}, {"states", states_json(s.states)}, {"agents", agents},
          {"events", s.events}};
}

StepRecord step_from(const json& j, const LogHeader& h) {
  StepRecord s;
  s.k = j.at("k");
  s.t = j.at("t");
  s.states = states_from(j.at("states"));
  if (s.states.size() != h.participants.size()) throw ValidationError("state count does not match header");
  for (const auto& a : j.at("agents")) {
    AgentStepRecord r;
    r.id = a.at("id");
    for (const auto& w : a.at("plan")) r.plan.samples.push_back({w.at(0), w.at(1), w.at(2), w.at(3), w.at(4)});
    r.controls = {a.at("controls").at(0), a.at("controls").at(1)};
    r.frame_digest = a.at("digest");
    s.agents.push_back(std::move(r));
  }
  s.events = j.at("events").get<std::vector<std::string>>();
  return s;
}

}  // namespace

geom::OrientedBox2D SimLog::footprint(int participant, const ParticipantRecord& r) const {
  return {Vec2(r.x, r.y), r.heading, header.participants.at(participant).half_extents};
}

std::vector<ParticipantRecord> SimLog::track(int participant) const {
  std::vector<ParticipantRecord> out;
  for (const auto& s : steps) out.push_back(s.states.at(participant));
  if (!final_states.empty()) out.push_back(final_states.at(participant));
  return out;
}

std::string serialize_log(const SimLog& log) {
  std::string out = header_json(log.header).dump() + "\n";
  for (const auto& s : log.steps) out += step_json(s).dump() + "\n";
  json end = {{"type", "end"},
              {"t", log.final_t},
              {"states", states_json(log.final_states)},
              {"termination", log.termination}};
  out += end.dump() + "\n";
  return out;
}

SimLog parse_log(const std::string& text) {
  SimLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t record = 0;
  bool ended = false;
  for (; std::getline(in, line); ++record) {
    if (line.empty()) continue;
    try {
      if (ended) throw ValidationError("record after end");
      json j = json::parse(line);
      const std::string type = j.at("type");
      if (record == 0) {
        if (type != "header") throw ValidationError("first record must be the header");
        log.header = header_from(j);
      } else if (type == "step") {
        log.steps.push_back(step_from(j, log.header));
        if (log.steps.back().k != int(log.steps.size()) - 1) throw ValidationError("step index out of sequence");
      } else if (type == "end") {
        log.final_t = j.at("t");
        log.final_states = states_from(j.at("states"));
        log.termination = j.at("termination");
        ended = true;
      } else {
        throw ValidationError("unknown record type '" + type + "'");
      }
    } catch (const LogFormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw LogFormatError(record, e.what());
    }
  }
  if (record == 0) throw LogFormatError(0, "empty log");
  if (!ended) throw LogFormatError(record, "missing end record");
  return log;
}

void write_log(const std::filesystem::path& path, const SimLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_log(log);
  if (!out) throw IoError("write failed: " + path.string());
}

SimLog read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_log(ss.str());
}

}  // namespace drivesim::simloop
