#include "drivesim/cli/cli.hpp"

int main(int argc, char** argv) { return drivesim::cli::main(argc, argv); }
