#include "drivesim/score/score.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "drivesim/common/error.hpp"

namespace drivesim::score {

using simloop::ParticipantRecord;
using simloop::SimLog;

namespace {

ParticipantRecord project(const ParticipantRecord& r, double tau) {
  return {r.x + r.v * tau * std::cos(r.heading), r.y + r.v * tau * std::sin(r.heading), r.heading, r.v};
}

// Every logged state in order: the world at each step, then the final state.
std::vector<const std::vector<ParticipantRecord>*> frames(const SimLog& log) {
  std::vector<const std::vector<ParticipantRecord>*> out;
  for (const auto& s : log.steps) out.push_back(&s.states);
  if (!log.final_states.empty()) out.push_back(&log.final_states);
  return out;
}

bool excused(const ParticipantRecord& ego, const ParticipantRecord& other, const ScoreConfig& cfg) {
  if (!cfg.at_fault_exclusion || std::abs(ego.v) > 0.05) return false;
  // Stopped ego hit from behind.
  const double rel = (other.x - ego.x) * std::cos(ego.heading) + (other.y - ego.y) * std::sin(ego.heading);
  return rel < 0.0;
}

}  // namespace

double pdms(const Subscores& s, const ScoreConfig& cfg) {
  const double wsum = cfg.w_ep + cfg.w_ttc + cfg.w_c;
  return s.nc * s.dac * ((cfg.w_ep * s.ep + cfg.w_ttc * s.ttc + cfg.w_c * s.comfort) / wsum);
}

std::optional<int> first_collision(const SimLog& log, int agent, const ScoreConfig& cfg) {
  const int ego = log.header.agents.at(agent).participant;
  const auto fs = frames(log);
  std::optional<int> first;
  for (int j = 0; j < int(log.header.participants.size()); ++j) {
    if (j == ego) continue;
    // Fault is judged when a contact begins and holds until the boxes separate.
    bool touching = false, excuse = false;
    for (int k = 0; k < int(fs.size()) && (!first || k < *first); ++k) {
      const auto& st = *fs[k];
      const bool hit = geom::boxes_overlap(log.footprint(ego, st[ego]), log.footprint(j, st[j]));
      if (hit && !touching) excuse = excused(st[ego], st[j], cfg);
      touching = hit;
      if (hit && !excuse) {
        first = k;
        break;
      }
    }
  }
  return first;
}

std::optional<int> first_offroad(const SimLog& log, int agent) {
  if (log.header.drivable.empty()) return std::nullopt;
  const int ego = log.header.agents.at(agent).participant;
  const auto fs = frames(log);
  for (std::size_t k = 0; k < fs.size(); ++k) {
    const auto box = log.footprint(ego, (*fs[k])[ego]);
    const bool inside = std::any_of(log.header.drivable.begin(), log.header.drivable.end(),
                                    [&](const geom::Polygon2D& p) { return geom::footprint_in_polygon(box, p); });
    if (!inside) return int(k);
  }
  return std::nullopt;
}

double nc_score(const SimLog& log, int agent, const ScoreConfig& cfg) {
  return first_collision(log, agent, cfg) ? 0.0 : 1.0;
}

double dac_score(const SimLog& log, int agent) { return first_offroad(log, agent) ? 0.0 : 1.0; }

double min_ttc(const SimLog& log, int agent, const ScoreConfig& cfg) {
  const int ego = log.header.agents.at(agent).participant;
  const double dt = log.header.dt;
  const int substeps = int(std::lround(cfg.ttc_horizon / dt));
  double best = std::numeric_limits<double>::infinity();
  for (const auto* st : frames(log)) {
    const auto& e = (*st)[ego];
    for (int j = 0; j < int(st->size()); ++j) {
      if (j == ego) continue;
      const auto& o = (*st)[j];
      auto overlap = [&](double tau) {
        return geom::boxes_overlap(log.footprint(ego, project(e, tau)), log.footprint(j, project(o, tau)));
      };
      for (int s = 0; s <= substeps; ++s) {
        const double tau = s * dt;
        if (tau >= best) break;
        if (!overlap(tau)) continue;
        double hi = tau;
        if (s > 0) {
          // First contact lies in ((s-1) dt, s dt]; refine by bisection.
          double lo = (s - 1) * dt;
          for (int it = 0; it < 40; ++it) {
            const double mid = 0.5 * (lo + hi);
            (overlap(mid) ? hi : lo) = mid;
          }
        }
        best = std::min(best, hi);
        break;
      }
    }
  }
  return best;
}

double ttc_score(const SimLog& log, int agent, const ScoreConfig& cfg) {
  return min_ttc(log, agent, cfg) >= cfg.ttc_threshold ? 1.0 : 0.0;
}

ComfortMetrics comfort_metrics(const std::vector<ParticipantRecord>& track, double dt) {
  ComfortMetrics m;
  const std::size_t n = track.size();
  if (n < 3) return m;
  std::vector<double> theta(n);
  theta[0] = track[0].heading;
  for (std::size_t k = 1; k < n; ++k) theta[k] = theta[k - 1] + wrap_angle(track[k].heading - track[k - 1].heading);
  std::vector<double> a_lon(n, 0.0);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double ax = (track[k + 1].x - 2.0 * track[k].x + track[k - 1].x) / (dt * dt);
    const double ay = (track[k + 1].y - 2.0 * track[k].y + track[k - 1].y) / (dt * dt);
    const double c = std::cos(theta[k]), s = std::sin(theta[k]);
    a_lon[k] = ax * c + ay * s;
    const double a_lat = -ax * s + ay * c;
    m.a_lon_min = std::min(m.a_lon_min, a_lon[k]);
    m.a_lon_max = std::max(m.a_lon_max, a_lon[k]);
    m.a_lat = std::max(m.a_lat, std::abs(a_lat));
    m.yaw_rate = std::max(m.yaw_rate, std::abs(theta[k + 1] - theta[k - 1]) / (2.0 * dt));
    m.yaw_acc = std::max(m.yaw_acc, std::abs(theta[k + 1] - 2.0 * theta[k] + theta[k - 1]) / (dt * dt));
    if (k >= 2) m.jerk = std::max(m.jerk, std::abs(a_lon[k] - a_lon[k - 1]) / dt);
  }
  return m;
}

bool within(const ComfortMetrics& m, const ComfortBounds& b) {
  return m.a_lon_min >= b.a_lon_min && m.a_lon_max <= b.a_lon_max && m.a_lat <= b.a_lat_max && m.jerk <= b.jerk_max &&
         m.yaw_rate <= b.yaw_rate_max && m.yaw_acc <= b.yaw_acc_max;
}

double comfort_score(const SimLog& log, int agent, const ScoreConfig& cfg) {
  const auto track = log.track(log.header.agents.at(agent).participant);
  return within(comfort_metrics(track, log.header.dt), cfg.comfort) ? 1.0 : 0.0;
}

double ep_score(const SimLog& log, int agent) {
  const auto& info = log.header.agents.at(agent);
  const auto track = log.track(info.participant);
  if (info.reference_progress <= 1e-9) return 1.0;
  if (track.size() < 2) return 0.0;
  const double s0 = info.route.project(Vec2(track.front().x, track.front().y));
  const double s1 = info.route.project(Vec2(track.back().x, track.back().y));
  return std::clamp((s1 - s0) / info.reference_progress, 0.0, 1.0);
}

AgentScore score_agent(const SimLog& log, int agent, const ScoreConfig& cfg) {
  cfg.validate();
  AgentScore a;
  a.agent_id = log.header.agents.at(agent).id;
  a.collision_step = first_collision(log, agent, cfg);
  a.offroad_step = first_offroad(log, agent);
  a.min_ttc = min_ttc(log, agent, cfg);
  a.sub.nc = a.collision_step ? 0.0 : 1.0;
  a.sub.dac = a.offroad_step ? 0.0 : 1.0;
  a.sub.ttc = a.min_ttc >= cfg.ttc_threshold ? 1.0 : 0.0;
  a.sub.comfort = comfort_score(log, agent, cfg);
  a.sub.ep = ep_score(log, agent);
  a.pdms = pdms(a.sub, cfg);
  return a;
}

ScenarioReport score_log(const SimLog& log, const ScoreConfig& cfg) {
  ScenarioReport r;
  r.scenario = log.header.scenario;
  r.mode = log.header.mode;
  Subscores sum{0, 0, 0, 0, 0};
  double psum = 0.0;
  for (int i = 0; i < int(log.header.agents.size()); ++i) {
    r.agents.push_back(score_agent(log, i, cfg));
    const auto& s = r.agents.back().sub;
    sum.nc += s.nc;
    sum.dac += s.dac;
    sum.ttc += s.ttc;
    sum.comfort += s.comfort;
    sum.ep += s.ep;
    psum += r.agents.back().pdms;
  }
  const double n = double(std::max<std::size_t>(r.agents.size(), 1));
  r.mean = {sum.nc / n, sum.dac / n, sum.ttc / n, sum.comfort / n, sum.ep / n};
  r.pdms = psum / n;
  return r;
}

SuiteSummary aggregate(const std::vector<ScenarioReport>& reports) {
  SuiteSummary s;
  s.scenarios = reports.size();
  s.mean = {0, 0, 0, 0, 0};
  if (reports.empty()) return s;
  for (const auto& r : reports) {
    s.mean.nc += r.mean.nc;
    s.mean.dac += r.mean.dac;
    s.mean.ttc += r.mean.ttc;
    s.mean.comfort += r.mean.comfort;
    s.mean.ep += r.mean.ep;
    s.pdms += r.pdms;
  }
  const double n = double(reports.size());
  s.mean = {s.mean.nc / n, s.mean.dac / n, s.mean.ttc / n, s.mean.comfort / n, s.mean.ep / n};
  s.pdms /= n;
  return s;
}

double gap(double pdms_real, double pdms_sim) {
  if (!(pdms_real > 0.0) || !(pdms_sim > 0.0))
    throw NonPositiveInput(fmt::format("gap needs positive PDMS, got {} and {}", pdms_real, pdms_sim));
  return std::abs(pdms_real - pdms_sim) / std::max(pdms_real, pdms_sim);
}

std::optional<GapSummary> gap_summary(const std::vector<ScenarioReport>& reports) {
  GapSummary g;
  double real = 0.0, sim = 0.0;
  for (const auto& r : reports) {
    if (!r.open_loop_pdms || *r.open_loop_pdms <= 0.0 || r.pdms <= 0.0) continue;
    ++g.sequences;
    g.per_sequence_mean += gap(*r.open_loop_pdms, r.pdms);
    real += *r.open_loop_pdms;
    sim += r.pdms;
  }
  if (g.sequences == 0) return std::nullopt;
  g.per_sequence_mean /= double(g.sequences);
  g.aggregate = gap(real / double(g.sequences), sim / double(g.sequences));
  return g;
}

namespace {

std::string pct(double v) { return fmt::format("{:.1f}", 100.0 * v); }

std::string row(const std::string& name, const Subscores& s, double p) {
  return fmt::format("{:<32} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n", name, pct(s.nc), pct(s.dac), pct(s.ttc),
                     pct(s.comfort), pct(s.ep), pct(p));
}

nlohmann::json sub_json(const Subscores& s, double p) {
  return {{"nc", s.nc}, {"dac", s.dac}, {"ttc", s.ttc}, {"comfort", s.comfort}, {"ep", s.ep}, {"pdms", p}};
}

}  // namespace

std::string report_table(const std::vector<ScenarioReport>& reports) {
  std::string out = fmt::format("{:<32} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n", "Scenario", "NC", "DAC", "TTC",
                                "Comf.", "EP", "PDMS");
  for (const auto& r : reports) out += row(r.scenario, r.mean, r.pdms);
  const auto s = aggregate(reports);
  out += row(fmt::format("mean ({})", s.scenarios), s.mean, s.pdms);
  if (auto g = gap_summary(reports))
    out += fmt::format("gap over {} sequences: per-sequence {}%, aggregate {}%\n", g->sequences,
                       pct(g->per_sequence_mean), pct(g->aggregate));
  return out;
}

std::string report_json(const std::vector<ScenarioReport>& reports) {
  using nlohmann::json;
  json scen = json::array();
  for (const auto& r : reports) {
    json agents = json::array();
    for (const auto& a : r.agents) {
      json j = sub_json(a.sub, a.pdms);
      j["id"] = a.agent_id;
      j["min_ttc"] = std::isfinite(a.min_ttc) ? json(a.min_ttc) : json(nullptr);
      j["collision_step"] = a.collision_step ? json(*a.collision_step) : json(nullptr);
      j["offroad_step"] = a.offroad_step ? json(*a.offroad_step) : json(nullptr);
      agents.push_back(j);
    }
    json j = sub_json(r.mean, r.pdms);
    j["scenario"] = r.scenario;
    j["mode"] = scene::to_string(r.mode);
    j["agents"] = agents;
    if (r.open_loop_pdms) j["open_loop_pdms"] = *r.open_loop_pdms;
    scen.push_back(j);
  }
  const auto s = aggregate(reports);
  json summary = sub_json(s.mean, s.pdms);
  summary["scenarios"] = s.scenarios;
  json out = {{"scenarios", scen}, {"summary", summary}};
  if (auto g = gap_summary(reports))
    out["gap"] = {{"sequences", g->sequences}, {"per_sequence_mean", g->per_sequence_mean}, {"aggregate", g->aggregate}};
  return out.dump(2) + "\n";
}

}  // namespace drivesim::score
