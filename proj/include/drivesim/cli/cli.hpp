#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "drivesim/geom/pose.hpp"
#include "drivesim/scene/scenario.hpp"

namespace drivesim::cli {

enum ExitCode : int { kOk = 0, kAgentFailure = 1, kConfigError = 2 };

struct RunManifest {
  std::vector<std::filesystem::path> scenarios;  // files, or directories searched for *.ini
  std::optional<scene::SimMode> mode;            // keep only scenarios of this mode
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> agents;     // agent id or "*" -> builtin name or endpoint
  std::filesystem::path out = "out";
  std::optional<std::filesystem::path> dump_frames;
  std::optional<std::array<double, 3>> weights;  // w_ep, w_ttc, w_c
  std::optional<int> n_steps;
  std::optional<double> dt;
  double accept_timeout = 30.0;  // s to wait for external agents to connect
};

/// Loads every scenario in the manifest, applies the mode filter and the
/// seed, step, dt and weight overrides, and checks that every agent is bound.
/// Throws ValidationError, ParseError or MissingAsset.
std::vector<scene::Scenario> load_scenarios(const RunManifest& m);

/// Binding for one agent id: its own entry, else the "*" wildcard.
std::string binding_for(const RunManifest& m, const std::string& agent_id);

int cmd_run(const RunManifest& m, std::ostream& out, std::ostream& err);

struct ScoreRequest {
  std::vector<std::filesystem::path> paths;  // log files or directories of *.jsonl
  std::optional<std::array<double, 3>> weights;
  std::optional<std::filesystem::path> out;  // report.txt and report.json go here
};
int cmd_score(const ScoreRequest& r, std::ostream& out, std::ostream& err);

struct RegisterRequest {
  std::filesystem::path clouds;  // directory of *.bin world-frame clouds, sorted by name
  std::optional<std::filesystem::path> annotations;
  std::optional<std::size_t> reference;
  bool full_se3 = false;
  std::filesystem::path out = "poses.txt";
};
int cmd_register(const RegisterRequest& r, std::ostream& out, std::ostream& err);

struct RenderRequest {
  std::filesystem::path scenario;
  std::string pose;  // "x,y,heading" of the ego
  double t = 0.0;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "render";
};
int cmd_render(const RenderRequest& r, std::ostream& out, std::ostream& err);

/// "x,y,heading" in metres and radians. Throws ValidationError.
geom::Pose parse_pose(const std::string& text);
/// "w_ep,w_ttc,w_c", each non-negative with a positive sum. Throws ValidationError.
std::array<double, 3> parse_weights(const std::string& text);

/// Subcommand dispatch for the drivesim executable.
int main(int argc, char** argv);

}  // namespace drivesim::cli
