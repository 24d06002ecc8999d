#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "drivesim/score/config.hpp"
#include "drivesim/simloop/log.hpp"

namespace drivesim::score {

struct Subscores {
  double nc = 1.0, dac = 1.0, ttc = 1.0, comfort = 1.0, ep = 1.0;
  bool operator==(const Subscores&) const = default;
};

/// (NC * DAC) times the weighted mean of EP, TTC and comfort.
double pdms(const Subscores& s, const ScoreConfig& cfg);

/// Index into the logged state sequence (steps then final state) of the first
/// counted overlap between the agent and any other participant.
std::optional<int> first_collision(const simloop::SimLog& log, int agent, const ScoreConfig& cfg);
std::optional<int> first_offroad(const simloop::SimLog& log, int agent);

double nc_score(const simloop::SimLog& log, int agent, const ScoreConfig& cfg);
double dac_score(const simloop::SimLog& log, int agent);

/// Smallest time to footprint overlap under constant-velocity projection,
/// over every logged state; infinity if nothing overlaps within the horizon.
double min_ttc(const simloop::SimLog& log, int agent, const ScoreConfig& cfg);
double ttc_score(const simloop::SimLog& log, int agent, const ScoreConfig& cfg);

/// Largest finite-difference magnitudes over the interior of a pose sequence.
struct ComfortMetrics {
  double a_lon_min = 0.0, a_lon_max = 0.0;
  double a_lat = 0.0, jerk = 0.0, yaw_rate = 0.0, yaw_acc = 0.0;
};
ComfortMetrics comfort_metrics(const std::vector<simloop::ParticipantRecord>& track, double dt);
bool within(const ComfortMetrics& m, const ComfortBounds& b);
double comfort_score(const simloop::SimLog& log, int agent, const ScoreConfig& cfg);

/// Route progress over the log divided by the reference progress, in [0, 1].
double ep_score(const simloop::SimLog& log, int agent);

struct AgentScore {
  std::string agent_id;
  Subscores sub;
  double pdms = 0.0;
  double min_ttc = std::numeric_limits<double>::infinity();
  std::optional<int> collision_step;
  std::optional<int> offroad_step;
};
AgentScore score_agent(const simloop::SimLog& log, int agent, const ScoreConfig& cfg);

struct ScenarioReport {
  std::string scenario;
  scene::SimMode mode = scene::SimMode::non_reactive;
  std::vector<AgentScore> agents;
  Subscores mean;     // over agent instances
  double pdms = 0.0;  // mean agent PDMS
  std::optional<double> open_loop_pdms;
};
/// Scores every agent in the log with `cfg` (usually log.header.scoring).
ScenarioReport score_log(const simloop::SimLog& log, const ScoreConfig& cfg);

struct SuiteSummary {
  std::size_t scenarios = 0;
  Subscores mean;
  double pdms = 0.0;
};
SuiteSummary aggregate(const std::vector<ScenarioReport>& reports);

/// |a - b| / max(a, b); both must be positive. Throws NonPositiveInput.
double gap(double pdms_real, double pdms_sim);

struct GapSummary {
  std::size_t sequences = 0;      // scenarios where both PDMS are positive
  double per_sequence_mean = 0.0;  // mean of per-scenario gaps
  double aggregate = 0.0;          // gap of the mean PDMS values over the same scenarios
};
std::optional<GapSummary> gap_summary(const std::vector<ScenarioReport>& reports);

/// Percentages with one decimal: one row per scenario and a mean row.
std::string report_table(const std::vector<ScenarioReport>& reports);
std::string report_json(const std::vector<ScenarioReport>& reports);

}  // namespace drivesim::score
