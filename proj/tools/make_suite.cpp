// Regenerates the shipped scenario suites under the given directory.
#include <CLI11.hpp>
#include <fmt/core.h>

#include "drivesim/scene/suite.hpp"

using namespace drivesim;

int main(int argc, char** argv) {
  CLI::App app{"Write the shipped scenario suites"};
  std::string out = "suites";
  app.add_option("out", out, "Output directory");
  CLI11_PARSE(app, argc, argv);
  const std::filesystem::path root(out);
  for (auto& sc : scene::non_reactive_suite()) scene::write_scenario(root / "non_reactive", sc);
  scene::write_scenario(root / "safety", scene::stationary_blocker_scenario());
  scene::write_scenario(root / "multi_agent", scene::crossing_scenario(false));
  scene::write_scenario(root / "multi_agent_mirrored", scene::crossing_scenario(true));
  fmt::print("wrote suites to {}\n", root.string());
  return 0;
}
